//! End-to-end training of the latent models and the evaluation protocols
//! built on top of them.

mod report;
mod sweep;
mod trials;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{derive_seed, sample_latents, LatentVector};
use crate::models::{
    fit_binary, fit_multiclass, fit_regressor, AttributeKind, LatentBundle, LatentModel,
    TrainingConfig,
};
use crate::world::{AttributeLabels, AttributeOracle, Generator};

pub use report::{cosine_report, render_scores, render_training, CosineReport};
pub use sweep::{sweep_entanglement, SweepConfig, SweepError, SweepOutcome, SweepRow, SWEEP_HEADER};
pub use trials::{
    eval_end_to_end, eval_latent_modification, evaluate, random_spec, EvalConfig, EvalReport,
    ScoreSet,
};

pub const MIN_TRAINING_SAMPLES: usize = 100;

const LATENT_TAG: u64 = 0x1a7e;
const LABEL_TAG: u64 = 0x1abe1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "value", rename_all = "snake_case")]
pub enum Score {
    Accuracy(f64),
    Rmse(f64),
}

impl Score {
    pub fn value(&self) -> f64 {
        match self {
            Score::Accuracy(v) | Score::Rmse(v) => *v,
        }
    }
}

impl std::fmt::Display for Score {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Score::Accuracy(v) => write!(f, "accuracy {v:.4}"),
            Score::Rmse(v) => write!(f, "rmse {v:.6}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScore {
    pub attribute: String,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub world_seed: Option<u64>,
    pub n_samples: usize,
    pub training: TrainingConfig,
    /// Held-out test metrics per attribute.
    pub test_metrics: Vec<AttributeScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedBundle {
    pub bundle: LatentBundle,
    pub provenance: Provenance,
}

impl TrainedBundle {
    pub fn metric(&self, attribute: &str) -> Option<Score> {
        self.provenance
            .test_metrics
            .iter()
            .find(|m| m.attribute == attribute)
            .map(|m| m.score)
    }
}

/// A labelled latent sample produced through the image pathway.
pub struct LabelledSample {
    pub latents: Vec<LatentVector>,
    pub labels: Vec<AttributeLabels>,
}

/// Samples latents, renders them and labels the renders with the oracle.
pub fn label_samples<W>(world: &W, n_samples: usize, seed: u64) -> Result<LabelledSample>
where
    W: Generator + AttributeOracle<<W as Generator>::Image>,
{
    let latents = sample_latents(n_samples, world.latent_dim(), derive_seed(seed, LATENT_TAG))?;
    let labels = latents
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let image = world.generate(z)?;
            world.label(&image, derive_seed(derive_seed(seed, LABEL_TAG), i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelledSample { latents, labels })
}

/// Trains one latent model per attribute on oracle labels.
pub fn run_training<W>(world: &W, n_samples: usize, cfg: &TrainingConfig) -> Result<TrainedBundle>
where
    W: Generator + AttributeOracle<<W as Generator>::Image>,
{
    if n_samples < MIN_TRAINING_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "training needs at least {MIN_TRAINING_SAMPLES} samples, got {n_samples}"
        )));
    }
    cfg.validate()?;
    let sample = label_samples(world, n_samples, cfg.seed)?;
    let schema = world.schema();

    let fitted = schema
        .par_iter()
        .map(|attr| -> Result<(LatentModel, Score)> {
            let wrap = |e: Error| Error::Training {
                attribute: attr.name.clone(),
                source: Box::new(e),
            };
            let discrete = |l: &AttributeLabels| -> Result<usize> {
                attr.class_index(&l.discrete[&attr.name])
            };
            match &attr.kind {
                AttributeKind::Binary { negative, positive } => {
                    let labels = sample
                        .labels
                        .iter()
                        .map(|l| discrete(l).map(|i| i == 1))
                        .collect::<Result<Vec<_>>>()?;
                    let m = fit_binary(&sample.latents, &labels, negative, positive, cfg).map_err(wrap)?;
                    let score = Score::Accuracy(m.meta.test_accuracy);
                    Ok((LatentModel::Binary(m), score))
                }
                AttributeKind::Multiclass { classes } => {
                    let labels = sample.labels.iter().map(discrete).collect::<Result<Vec<_>>>()?;
                    let m = fit_multiclass(&sample.latents, &labels, classes, cfg).map_err(wrap)?;
                    let score = Score::Accuracy(m.meta.test_accuracy);
                    Ok((LatentModel::Multiclass(m), score))
                }
                AttributeKind::Continuous { .. } => {
                    let targets: Vec<f64> =
                        sample.labels.iter().map(|l| l.continuous[&attr.name]).collect();
                    let m = fit_regressor(&sample.latents, &targets, cfg).map_err(wrap)?;
                    let score = Score::Rmse(m.meta.test_rmse);
                    Ok((LatentModel::Regressor(m), score))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut models = BTreeMap::new();
    let mut test_metrics = Vec::new();
    for (attr, (model, score)) in schema.iter().zip(fitted) {
        models.insert(attr.name.clone(), model);
        test_metrics.push(AttributeScore {
            attribute: attr.name.clone(),
            score,
        });
    }
    Ok(TrainedBundle {
        bundle: LatentBundle::new(world.latent_dim(), schema.to_vec(), models)?,
        provenance: Provenance {
            world_seed: world.seed(),
            n_samples,
            training: cfg.clone(),
            test_metrics,
        },
    })
}
