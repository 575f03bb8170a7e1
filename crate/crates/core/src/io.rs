//! On-disk formats: model bundles, worlds, and the conditioning string.
//!
//! Files are pretty-printed JSON with a `format_version`. Floats use the
//! shortest decimal that parses back to the same `f64`, so save → load → save
//! is byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::director::ConditioningSpec;
use crate::error::{Error, Result};
use crate::eval::{Provenance, TrainedBundle};
use crate::models::{AttributeKind, AttributeSchema, LatentBundle, LatentModel};
use crate::world::{SyntheticWorld, WorldConfig};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const WORLD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub attribute: String,
    pub model: LatentModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundleFile {
    pub format_version: u32,
    pub latent_dim: usize,
    pub schema: Vec<AttributeSchema>,
    pub models: Vec<ModelRecord>,
    /// Absent for bundles exported from a world's ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ModelBundleFile {
    pub fn new(bundle: &LatentBundle, provenance: Option<Provenance>) -> Self {
        Self {
            format_version: BUNDLE_FORMAT_VERSION,
            latent_dim: bundle.dim(),
            schema: bundle.attributes().to_vec(),
            models: bundle
                .iter()
                .map(|(a, m)| ModelRecord {
                    attribute: a.name.clone(),
                    model: m.clone(),
                })
                .collect(),
            provenance,
        }
    }

    pub fn from_trained(trained: &TrainedBundle) -> Self {
        Self::new(&trained.bundle, Some(trained.provenance.clone()))
    }

    pub fn to_bundle(&self) -> Result<LatentBundle> {
        check_version(BUNDLE_FORMAT_VERSION, self.format_version)?;
        let mut models = BTreeMap::new();
        for r in &self.models {
            if models.insert(r.attribute.clone(), r.model.clone()).is_some() {
                return Err(Error::Config(format!(
                    "bundle lists attribute `{}` twice",
                    r.attribute
                )));
            }
        }
        LatentBundle::new(self.latent_dim, self.schema.clone(), models)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self, "serializing model bundle")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = from_json(text, "model bundle")?;
        check_version(BUNDLE_FORMAT_VERSION, file.format_version)?;
        file.to_bundle()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    pub format_version: u32,
    pub config: WorldConfig,
    pub directions: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub gains: Vec<f64>,
}

impl WorldFile {
    pub fn new(world: &SyntheticWorld) -> Self {
        Self {
            format_version: WORLD_FORMAT_VERSION,
            config: world.config().clone(),
            directions: world.directions().to_vec(),
            offsets: world.offsets().to_vec(),
            gains: world.gains().to_vec(),
        }
    }

    pub fn to_world(&self) -> Result<SyntheticWorld> {
        check_version(WORLD_FORMAT_VERSION, self.format_version)?;
        SyntheticWorld::from_parts(
            self.config.clone(),
            self.directions.clone(),
            self.offsets.clone(),
            self.gains.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self, "serializing world")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = from_json(text, "world file")?;
        file.to_world()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<SyntheticWorld> {
        Self::from_json(&read_text(path)?)?.to_world()
    }
}

pub fn load_world_config(path: &Path) -> Result<WorldConfig> {
    from_json(&read_text(path)?, &path.display().to_string())
}

/// Parses `name=value(,name=value)*` against a schema. Whitespace around
/// tokens is ignored; discrete values are class names, continuous values
/// decimal reals inside the attribute's range.
pub fn parse_conditioning(text: &str, schema: &[AttributeSchema]) -> Result<ConditioningSpec> {
    let known = || {
        schema
            .iter()
            .map(|a| a.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut spec = ConditioningSpec::default();
    if text.trim().is_empty() {
        return Err(Error::Parse("empty conditioning string".into()));
    }
    for item in text.split(',') {
        let (name, value) = item
            .split_once('=')
            .map(|(n, v)| (n.trim(), v.trim()))
            .ok_or_else(|| Error::Parse(format!("`{}` is not of the form name=value", item.trim())))?;
        if name.is_empty() || value.is_empty() {
            return Err(Error::Parse(format!("`{}` is missing a name or value", item.trim())));
        }
        let attr = schema
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute {
                name: name.into(),
                known: known(),
            })?;
        let duplicate = match attr.kind {
            AttributeKind::Continuous { lo, hi } => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("`{value}` is not a number for `{name}`")))?;
                if !(v.is_finite() && lo <= v && v <= hi) {
                    return Err(Error::OutOfRange {
                        attribute: name.into(),
                        value: v,
                        lo,
                        hi,
                    });
                }
                spec.continuous_targets.insert(name.into(), v).is_some()
            }
            _ => {
                attr.class_index(value)?;
                spec.discrete_targets.insert(name.into(), value.into()).is_some()
            }
        };
        if duplicate {
            return Err(Error::Parse(format!("attribute `{name}` given twice")));
        }
    }
    Ok(spec)
}

fn check_version(expected: u32, found: u32) -> Result<()> {
    if expected != found {
        return Err(Error::FormatVersion { expected, found });
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T, context: &str) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::json(context, e))?;
    s.push('\n');
    Ok(s)
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::json(format!("parsing {context}"), e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
