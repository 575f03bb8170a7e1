//! The latent-attribute block: linear classifiers and regressors fitted on
//! (latent, label) pairs.

mod data;
pub mod logistic;
pub mod regression;
pub mod softmax;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{check_dims, dot, Hyperplane, LatentVector};

pub use data::split_indices;
pub use logistic::fit_binary;
pub use regression::{fit_regressor, RIDGE};
pub use softmax::fit_multiclass;

/// A named attribute and the values it can take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttributeKind {
    Binary { negative: String, positive: String },
    Multiclass { classes: Vec<String> },
    Continuous { lo: f64, hi: f64 },
}

impl AttributeSchema {
    pub fn binary(name: &str, negative: &str, positive: &str) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Binary {
                negative: negative.into(),
                positive: positive.into(),
            },
        }
    }

    pub fn multiclass(name: &str, classes: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Multiclass {
                classes: classes.iter().map(|c| c.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Continuous { lo, hi },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let valid_name = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !valid_name {
            return Err(Error::Config(format!(
                "attribute name `{}` must be a non-empty identifier",
                self.name
            )));
        }
        match &self.kind {
            AttributeKind::Binary { negative, positive } => {
                if negative == positive {
                    return Err(Error::Config(format!(
                        "attribute `{}` has duplicate class name `{negative}`",
                        self.name
                    )));
                }
            }
            AttributeKind::Multiclass { classes } => {
                if classes.len() < 3 {
                    return Err(Error::Config(format!(
                        "multiclass attribute `{}` needs at least 3 classes",
                        self.name
                    )));
                }
                let unique: BTreeSet<_> = classes.iter().collect();
                if unique.len() != classes.len() {
                    return Err(Error::Config(format!(
                        "attribute `{}` has duplicate class names",
                        self.name
                    )));
                }
            }
            AttributeKind::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Config(format!(
                        "attribute `{}` needs finite lo < hi, got ({lo}, {hi})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self.kind, AttributeKind::Continuous { .. })
    }

    /// Class names in index order; empty for continuous attributes.
    pub fn classes(&self) -> Vec<&str> {
        match &self.kind {
            AttributeKind::Binary { negative, positive } => vec![negative, positive],
            AttributeKind::Multiclass { classes } => classes.iter().map(String::as_str).collect(),
            AttributeKind::Continuous { .. } => Vec::new(),
        }
    }

    pub fn class_index(&self, class: &str) -> Result<usize> {
        let classes = self.classes();
        classes
            .iter()
            .position(|c| *c == class)
            .ok_or_else(|| Error::UnknownClass {
                attribute: self.name.clone(),
                class: class.into(),
                legal: classes.join(", "),
            })
    }

    /// Number of ground-truth directions the attribute occupies.
    pub fn direction_count(&self) -> usize {
        match &self.kind {
            AttributeKind::Multiclass { classes } => classes.len(),
            _ => 1,
        }
    }
}

/// Gradient-descent and split settings shared by all fitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2_penalty: 1e-4,
            split_fraction: 0.8,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::Config(format!(
                "l2_penalty must be non-negative, got {}",
                self.l2_penalty
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMeta {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub test_accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorMeta {
    pub test_rmse: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Logistic classifier: positive iff `d·z + b >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLatentClassifier {
    pub hyperplane: Hyperplane,
    pub negative_class: String,
    pub positive_class: String,
    pub meta: ClassifierMeta,
}

impl BinaryLatentClassifier {
    pub fn is_positive(&self, z: &[f64]) -> Result<bool> {
        Ok(self.hyperplane.score(z)? >= 0.0)
    }

    pub fn predict(&self, z: &[f64]) -> Result<&str> {
        Ok(if self.is_positive(z)? {
            &self.positive_class
        } else {
            &self.negative_class
        })
    }
}

/// Softmax classifier over `k` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassLatentClassifier {
    pub class_names: Vec<String>,
    pub class_weights: Vec<Vec<f64>>,
    pub class_intercepts: Vec<f64>,
    pub meta: ClassifierMeta,
}

impl MultiClassLatentClassifier {
    pub fn dim(&self) -> usize {
        self.class_weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim(), z.len())?;
        Ok(self
            .class_weights
            .iter()
            .zip(&self.class_intercepts)
            .map(|(w, b)| dot(w, z) + b)
            .collect())
    }

    pub fn predict_index(&self, z: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(z)?))
    }

    pub fn predict(&self, z: &[f64]) -> Result<&str> {
        Ok(&self.class_names[self.predict_index(z)?])
    }

    /// Boundary between `from` and `to`; positive side is where `to` outscores `from`.
    pub fn pairwise_hyperplane(&self, from: usize, to: usize) -> Result<Hyperplane> {
        let direction = self.class_weights[to]
            .iter()
            .zip(&self.class_weights[from])
            .map(|(a, b)| a - b)
            .collect();
        Hyperplane::new(
            direction,
            self.class_intercepts[to] - self.class_intercepts[from],
        )
    }

    /// `w_j` minus the mean of the other class weights.
    pub fn one_vs_rest_direction(&self, class: usize) -> Vec<f64> {
        let k = self.class_weights.len();
        let others = (k - 1) as f64;
        let mut out = self.class_weights[class].clone();
        for (j, w) in self.class_weights.iter().enumerate() {
            if j == class {
                continue;
            }
            for (o, v) in out.iter_mut().zip(w) {
                *o -= v / others;
            }
        }
        out
    }
}

/// Linear regressor `z ↦ d·z + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRegressor {
    pub line: Hyperplane,
    pub meta: RegressorMeta,
}

impl LatentRegressor {
    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        self.line.score(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentModel {
    Binary(BinaryLatentClassifier),
    Multiclass(MultiClassLatentClassifier),
    Regressor(LatentRegressor),
}

impl LatentModel {
    pub fn dim(&self) -> usize {
        match self {
            LatentModel::Binary(m) => m.hyperplane.dim(),
            LatentModel::Multiclass(m) => m.dim(),
            LatentModel::Regressor(m) => m.line.dim(),
        }
    }

    fn matches(&self, kind: &AttributeKind) -> bool {
        match (self, kind) {
            (LatentModel::Binary(m), AttributeKind::Binary { negative, positive }) => {
                &m.negative_class == negative && &m.positive_class == positive
            }
            (LatentModel::Multiclass(m), AttributeKind::Multiclass { classes }) => {
                &m.class_names == classes
            }
            (LatentModel::Regressor(_), AttributeKind::Continuous { .. }) => true,
            _ => false,
        }
    }

    /// Directions used for cosine reporting, labelled by attribute (and class).
    pub fn report_directions(&self, attribute: &str) -> Vec<(String, Vec<f64>)> {
        match self {
            LatentModel::Binary(m) => vec![(attribute.into(), m.hyperplane.direction().to_vec())],
            LatentModel::Regressor(m) => vec![(attribute.into(), m.line.direction().to_vec())],
            LatentModel::Multiclass(m) => m
                .class_names
                .iter()
                .enumerate()
                .map(|(j, c)| (format!("{attribute}:{c}"), m.one_vs_rest_direction(j)))
                .collect(),
        }
    }
}

pub fn predict_discrete<'a>(model: &'a LatentModel, z: &LatentVector) -> Result<&'a str> {
    match model {
        LatentModel::Binary(m) => m.predict(z.as_slice()),
        LatentModel::Multiclass(m) => m.predict(z.as_slice()),
        LatentModel::Regressor(_) => Err(Error::InvalidArgument(
            "predict_discrete called on a regressor".into(),
        )),
    }
}

pub fn predict_value(model: &LatentModel, z: &LatentVector) -> Result<f64> {
    match model {
        LatentModel::Regressor(m) => m.predict(z.as_slice()),
        _ => Err(Error::InvalidArgument(
            "predict_value called on a classifier".into(),
        )),
    }
}

/// Schema plus one fitted model per attribute, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentBundle {
    dim: usize,
    attributes: Vec<AttributeSchema>,
    models: Vec<LatentModel>,
}

impl LatentBundle {
    pub fn new(
        dim: usize,
        attributes: Vec<AttributeSchema>,
        mut models: BTreeMap<String, LatentModel>,
    ) -> Result<Self> {
        let mut ordered = Vec::with_capacity(attributes.len());
        for attr in &attributes {
            attr.validate()?;
            let model = models.remove(&attr.name).ok_or_else(|| {
                Error::BundleIncomplete(format!("no model for attribute `{}`", attr.name))
            })?;
            if !model.matches(&attr.kind) {
                return Err(Error::BundleIncomplete(format!(
                    "model for `{}` does not match its schema",
                    attr.name
                )));
            }
            check_dims(dim, model.dim())?;
            ordered.push(model);
        }
        if let Some(extra) = models.keys().next() {
            return Err(Error::UnknownAttribute {
                name: extra.clone(),
                known: attributes
                    .iter()
                    .map(|a| a.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
            });
        }
        Ok(Self {
            dim,
            attributes,
            models: ordered,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.attributes
    }

    pub fn models(&self) -> &[LatentModel] {
        &self.models
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AttributeSchema, &LatentModel)> {
        self.attributes.iter().zip(&self.models)
    }

    pub fn get(&self, name: &str) -> Option<(&AttributeSchema, &LatentModel)> {
        self.iter().find(|(a, _)| a.name == name)
    }

    pub fn attribute_names(&self) -> String {
        self.attributes
            .iter()
            .map(|a| a.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Labelled reporting directions across all models.
    pub fn report_directions(&self) -> Vec<(String, Vec<f64>)> {
        self.iter()
            .flat_map(|(a, m)| m.report_directions(&a.name))
            .collect()
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
