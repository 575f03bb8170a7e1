use serde::{Deserialize, Serialize};

use super::report::finish;
use super::{eval_latent_modification, run_training, EvalConfig, Score};
use crate::director::DirectorConfig;
use crate::error::{Error, Result};
use crate::latent::cosine_similarity;
use crate::models::{AttributeSchema, LatentModel, TrainingConfig};
use crate::world::{build_world, WorldConfig};

pub const SWEEP_HEADER: [&str; 6] = [
    "cosine",
    "learned_cosine",
    "accuracy_a",
    "accuracy_b",
    "joint_accuracy",
    "repaired_joint_accuracy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dim: usize,
    pub n_samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub training: TrainingConfig,
    pub director: DirectorConfig,
    /// Rounds for the repaired column; 0 leaves it empty.
    pub repair_rounds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            n_samples: 10_000,
            trials: 10_000,
            seed: 0,
            training: TrainingConfig::default(),
            director: DirectorConfig::default(),
            repair_rounds: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cosine: f64,
    pub learned_cosine: f64,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub joint_accuracy: f64,
    pub repaired_joint_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepError {
    pub cosine: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<SweepError>,
}

impl SweepOutcome {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SWEEP_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.cosine.to_string(),
                r.learned_cosine.to_string(),
                r.accuracy_a.to_string(),
                r.accuracy_b.to_string(),
                r.joint_accuracy.to_string(),
                r.repaired_joint_accuracy.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        finish(w)
    }
}

/// Two-binary-attribute world with the given direction cosine.
pub fn sweep_world_config(cosine: f64, dim: usize, seed: u64) -> WorldConfig {
    WorldConfig::new(
        dim,
        vec![
            AttributeSchema::binary("a", "a_neg", "a_pos"),
            AttributeSchema::binary("b", "b_neg", "b_pos"),
        ],
        seed,
    )
    .with_entanglement(vec![vec![1.0, cosine], vec![cosine, 1.0]])
}

fn sweep_one(cosine: f64, cfg: &SweepConfig) -> Result<SweepRow> {
    if !(cosine > -1.0 && cosine < 1.0) {
        return Err(Error::Config(format!("cosine {cosine} outside (-1, 1)")));
    }
    let world = build_world(sweep_world_config(cosine, cfg.dim, cfg.seed))?;
    let trained = run_training(&world, cfg.n_samples, &cfg.training)?;
    let dirs: Vec<&[f64]> = trained
        .bundle
        .models()
        .iter()
        .map(|m| match m {
            LatentModel::Binary(b) => b.hyperplane.direction(),
            _ => unreachable!("sweep worlds are binary"),
        })
        .collect();
    let learned_cosine = cosine_similarity(dirs[0], dirs[1])?;
    let mut eval = EvalConfig {
        trials: cfg.trials,
        seed: cfg.seed,
        director: cfg.director.clone(),
        repair_rounds: 0,
    };
    let single = eval_latent_modification(&trained.bundle, &eval)?;
    let repaired = if cfg.repair_rounds > 0 {
        eval.repair_rounds = cfg.repair_rounds;
        eval_latent_modification(&trained.bundle, &eval)?.joint_accuracy
    } else {
        None
    };
    let acc = |name| single.get(name).map(|s: Score| s.value()).unwrap_or(f64::NAN);
    Ok(SweepRow {
        cosine,
        learned_cosine,
        accuracy_a: acc("a"),
        accuracy_b: acc("b"),
        joint_accuracy: single.joint_accuracy.unwrap_or(f64::NAN),
        repaired_joint_accuracy: repaired,
    })
}

/// Trains and evaluates one fresh world per cosine. Per-value failures are
/// collected rather than aborting the sweep.
pub fn sweep_entanglement(cos_values: &[f64], cfg: &SweepConfig) -> SweepOutcome {
    let mut out = SweepOutcome::default();
    for &c in cos_values {
        match sweep_one(c, cfg) {
            Ok(row) => out.rows.push(row),
            Err(e) => out.errors.push(SweepError {
                cosine: c,
                message: e.to_string(),
            }),
        }
    }
    out
}
