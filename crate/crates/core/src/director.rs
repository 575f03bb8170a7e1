//! Single-step latent conditioning.
//!
//! Given a latent `z`, desired attribute values and a bundle of latent
//! models, the director computes the current labels, decides which discrete
//! attributes must change (the choose vector), and sums one displacement per
//! attribute into a single update `z' = z + Σ contributions`:
//!
//! * binary attributes move along their unit normal by the signed distance
//!   plus a margin `δ`, landing `δ` past the hyperplane;
//! * multiclass attributes cross the pairwise boundary between the current
//!   and desired class, redirecting against a captured third class a bounded
//!   number of times;
//! * continuous attributes move along the unit slope so that the regressor's
//!   prediction changes by `Δ = target − current`.
//!
//! The literal variants reproduce the unmodified textbook update for
//! comparison: they subtract `(s + δ)·d̂` for binary attributes (which moves
//! away from the boundary) and add `Δ·d̂` for continuous ones (which changes
//! the prediction by `Δ·||d||`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{signed_distance, DirectionKind, DirectionMatrix, Hyperplane, LatentVector};
use crate::models::{
    argmax, predict_discrete, predict_value, AttributeKind, LatentBundle, LatentModel,
    MultiClassLatentClassifier,
};
use crate::world::AttributeLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    #[default]
    Corrected,
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    #[default]
    Calibrated,
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectorConfig {
    /// Overshoot past a boundary, in signed-distance units.
    pub delta_margin: f64,
    pub sign_convention: SignConvention,
    pub continuous_calibration: Calibration,
    /// Upper bound on pairwise moves per multiclass attribute.
    pub multiclass_max_redirects: usize,
}

impl Default for DirectorConfig {
    fn default() -> Self {
        Self {
            delta_margin: 0.5,
            sign_convention: SignConvention::Corrected,
            continuous_calibration: Calibration::Calibrated,
            multiclass_max_redirects: 3,
        }
    }
}

impl DirectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_margin > 0.0 && self.delta_margin.is_finite()) {
            return Err(Error::Config(format!(
                "delta_margin must be positive, got {}",
                self.delta_margin
            )));
        }
        if self.multiclass_max_redirects == 0 {
            return Err(Error::Config("multiclass_max_redirects must be at least 1".into()));
        }
        Ok(())
    }
}

/// Desired attribute values; attributes not listed are left alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditioningSpec {
    pub discrete_targets: BTreeMap<String, String>,
    pub continuous_targets: BTreeMap<String, f64>,
}

impl ConditioningSpec {
    pub fn is_empty(&self) -> bool {
        self.discrete_targets.is_empty() && self.continuous_targets.is_empty()
    }

    pub fn validate(&self, bundle: &LatentBundle) -> Result<()> {
        let unknown = |name: &str| Error::UnknownAttribute {
            name: name.into(),
            known: bundle.attribute_names(),
        };
        for (name, class) in &self.discrete_targets {
            let (attr, _) = bundle.get(name).ok_or_else(|| unknown(name))?;
            if !attr.is_discrete() {
                return Err(Error::InvalidArgument(format!(
                    "attribute `{name}` is continuous; give it a numeric target"
                )));
            }
            attr.class_index(class)?;
        }
        for (name, &value) in &self.continuous_targets {
            let (attr, _) = bundle.get(name).ok_or_else(|| unknown(name))?;
            match attr.kind {
                AttributeKind::Continuous { lo, hi } => {
                    if !(value.is_finite() && lo <= value && value <= hi) {
                        return Err(Error::OutOfRange {
                            attribute: name.clone(),
                            value,
                            lo,
                            hi,
                        });
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "attribute `{name}` is discrete; give it a class name"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Whether `labels` meet every discrete target.
    pub fn discrete_satisfied(&self, labels: &AttributeLabels) -> bool {
        self.discrete_targets
            .iter()
            .all(|(name, class)| labels.discrete.get(name) == Some(class))
    }
}

/// One indicator per discrete attribute: set iff a target is given and the
/// current class differs from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChooseVector {
    pub attributes: Vec<String>,
    pub bits: Vec<bool>,
}

impl ChooseVector {
    pub fn get(&self, name: &str) -> bool {
        self.attributes
            .iter()
            .position(|a| a == name)
            .is_some_and(|i| self.bits[i])
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }
}

/// Signed distance of a latent to an attribute's hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDistance {
    pub attribute: String,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub z: LatentVector,
    pub z_prime: LatentVector,
    pub labels_before: AttributeLabels,
    pub labels_after: AttributeLabels,
    pub choose: ChooseVector,
    /// `Δ` per specified continuous attribute.
    pub deltas: BTreeMap<String, f64>,
    /// Binary and continuous attributes only.
    pub distances: Vec<AttributeDistance>,
    /// Pairwise moves spent per multiclass attribute.
    pub multiclass_moves: BTreeMap<String, usize>,
    pub config: DirectorConfig,
}

impl UpdateReport {
    pub fn is_identity(&self) -> bool {
        self.z == self.z_prime
    }
}

/// Current labels of `z` under the bundle's latent models.
pub fn latent_labels(bundle: &LatentBundle, z: &LatentVector) -> Result<AttributeLabels> {
    let mut labels = AttributeLabels::default();
    for (attr, model) in bundle.iter() {
        if attr.is_discrete() {
            labels
                .discrete
                .insert(attr.name.clone(), predict_discrete(model, z)?.to_string());
        } else {
            labels
                .continuous
                .insert(attr.name.clone(), predict_value(model, z)?);
        }
    }
    Ok(labels)
}

/// XOR of desired and current discrete labels; unspecified targets give 0.
pub fn choose_vector(
    desired: &BTreeMap<String, String>,
    current: &BTreeMap<String, String>,
) -> Result<ChooseVector> {
    if let Some(name) = desired.keys().find(|k| !current.contains_key(*k)) {
        return Err(Error::UnknownAttribute {
            name: name.clone(),
            known: current.keys().cloned().collect::<Vec<_>>().join(", "),
        });
    }
    let attributes: Vec<String> = current.keys().cloned().collect();
    let bits = attributes
        .iter()
        .map(|a| desired.get(a).is_some_and(|want| want != &current[a]))
        .collect();
    Ok(ChooseVector { attributes, bits })
}

/// Applies the combined single-step update.
pub fn condition(
    z: &LatentVector,
    spec: &ConditioningSpec,
    bundle: &LatentBundle,
    cfg: &DirectorConfig,
) -> Result<UpdateReport> {
    cfg.validate()?;
    spec.validate(bundle)?;
    if z.dim() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            expected: bundle.dim(),
            found: z.dim(),
        });
    }
    let dim = z.dim();
    let before = latent_labels(bundle, z)?;
    let choose = choose_vector(&spec.discrete_targets, &before.discrete)?;
    let delta = cfg.delta_margin;

    // binary rows of D_c with weights c∘(s + δ) (signs per convention)
    let mut binary_planes: Vec<&Hyperplane> = Vec::new();
    let mut binary_weights = Vec::new();
    // rows of D_r with weights Δ (or Δ/||d||)
    let mut continuous_planes: Vec<&Hyperplane> = Vec::new();
    let mut continuous_weights = Vec::new();
    let mut deltas = BTreeMap::new();
    let mut multiclass_total = vec![0.0; dim];
    let mut multiclass_moves = BTreeMap::new();

    for (attr, model) in bundle.iter() {
        match model {
            LatentModel::Binary(m) => {
                if !choose.get(&attr.name) {
                    continue;
                }
                let s = signed_distance(z, &m.hyperplane)?;
                let step = match cfg.sign_convention {
                    // s > 0 means a negative score; ties already count as positive
                    SignConvention::Corrected => s + if s > 0.0 { delta } else { -delta },
                    SignConvention::PaperLiteral => -(s + delta),
                };
                binary_planes.push(&m.hyperplane);
                binary_weights.push(step);
            }
            LatentModel::Multiclass(m) => {
                let Some(want) = spec.discrete_targets.get(&attr.name) else {
                    continue;
                };
                if !choose.get(&attr.name) {
                    multiclass_moves.insert(attr.name.clone(), 0);
                    continue;
                }
                let target = attr.class_index(want)?;
                let (moves, displacement) =
                    multiclass_move(m, z.as_slice(), target, delta, cfg.multiclass_max_redirects)?;
                for (t, d) in multiclass_total.iter_mut().zip(&displacement) {
                    *t += d;
                }
                multiclass_moves.insert(attr.name.clone(), moves);
            }
            LatentModel::Regressor(m) => {
                let Some(&target) = spec.continuous_targets.get(&attr.name) else {
                    continue;
                };
                let current = before.continuous[&attr.name];
                let d = target - current;
                deltas.insert(attr.name.clone(), d);
                if d == 0.0 {
                    continue;
                }
                let norm = m.line.norm();
                if norm == 0.0 {
                    return Err(Error::DegenerateModel(format!(
                        "regressor for `{}` has zero slope",
                        attr.name
                    )));
                }
                continuous_planes.push(&m.line);
                continuous_weights.push(match cfg.continuous_calibration {
                    Calibration::Calibrated => d / norm,
                    Calibration::PaperLiteral => d,
                });
            }
        }
    }

    let d_c = DirectionMatrix::from_hyperplanes(binary_planes, DirectionKind::Discrete)?;
    let d_r = DirectionMatrix::from_hyperplanes(continuous_planes, DirectionKind::Continuous)?;
    let moves_any = !d_c.is_empty() || !d_r.is_empty() || multiclass_total.iter().any(|&v| v != 0.0);

    let z_prime = if moves_any {
        let discrete = d_c.combine(&binary_weights, dim)?;
        let continuous = d_r.combine(&continuous_weights, dim)?;
        let values = z
            .as_slice()
            .iter()
            .zip(discrete.iter().zip(&continuous).zip(&multiclass_total))
            .map(|(zi, ((a, b), c))| zi + (a + c + b))
            .collect();
        LatentVector::new(values)?
    } else {
        z.clone()
    };

    let after = latent_labels(bundle, &z_prime)?;
    let mut distances = Vec::new();
    for (attr, model) in bundle.iter() {
        let plane = match model {
            LatentModel::Binary(m) => &m.hyperplane,
            LatentModel::Regressor(m) if m.line.norm() > 0.0 => &m.line,
            _ => continue,
        };
        distances.push(AttributeDistance {
            attribute: attr.name.clone(),
            before: signed_distance(z, plane)?,
            after: signed_distance(&z_prime, plane)?,
        });
    }

    Ok(UpdateReport {
        z: z.clone(),
        z_prime,
        labels_before: before,
        labels_after: after,
        choose,
        deltas,
        distances,
        multiclass_moves,
        config: cfg.clone(),
    })
}

/// Pairwise-boundary moves from the current argmax toward class `target`.
///
/// Returns the number of moves and the summed displacement.
fn multiclass_move(
    model: &MultiClassLatentClassifier,
    z: &[f64],
    target: usize,
    delta: f64,
    max_moves: usize,
) -> Result<(usize, Vec<f64>)> {
    let mut x = z.to_vec();
    let mut displacement = vec![0.0; z.len()];
    let mut current = argmax(&model.scores(&x)?);
    let mut moves = 0;
    while current != target && moves < max_moves {
        let boundary = model.pairwise_hyperplane(current, target)?;
        let norm = boundary.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateModel(format!(
                "classes `{}` and `{}` share identical weights",
                model.class_names[current], model.class_names[target]
            )));
        }
        // score < 0 here: `current` outscores `target`
        let step = -boundary.score(&x)? / norm + delta;
        for ((xi, di), w) in x.iter_mut().zip(displacement.iter_mut()).zip(boundary.direction()) {
            let m = step * w / norm;
            *xi += m;
            *di += m;
        }
        moves += 1;
        current = argmax(&model.scores(&x)?);
    }
    Ok((moves, displacement))
}

/// Re-runs [`condition`] on its own output until every discrete target holds
/// or `max_rounds` updates have been applied. Returns one report per round.
pub fn condition_with_repair(
    z: &LatentVector,
    spec: &ConditioningSpec,
    bundle: &LatentBundle,
    cfg: &DirectorConfig,
    max_rounds: usize,
) -> Result<Vec<UpdateReport>> {
    let mut rounds: Vec<UpdateReport> = Vec::new();
    let mut current = z.clone();
    for _ in 0..max_rounds.max(1) {
        let report = condition(&current, spec, bundle, cfg)?;
        let done = spec.discrete_satisfied(&report.labels_after);
        current = report.z_prime.clone();
        rounds.push(report);
        if done {
            break;
        }
    }
    Ok(rounds)
}
