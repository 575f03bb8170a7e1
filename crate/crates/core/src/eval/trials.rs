use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{cosine_report, CosineReport};
use super::{AttributeScore, Score};
use crate::director::{condition, condition_with_repair, ConditioningSpec, DirectorConfig};
use crate::error::{Error, Result};
use crate::latent::{sample_latent, stream_rng, LatentVector};
use crate::models::{predict_discrete, predict_value, AttributeKind, AttributeSchema, LatentBundle};
use crate::world::{AttributeLabels, AttributeOracle, Generator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub trials: usize,
    pub seed: u64,
    pub director: DirectorConfig,
    /// 0 applies the single-step update; otherwise up to this many rounds.
    pub repair_rounds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 0,
            director: DirectorConfig::default(),
            repair_rounds: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        self.director.validate()
    }
}

/// Per-attribute outcomes over a fixed number of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub trials: usize,
    pub seed: u64,
    pub scores: Vec<AttributeScore>,
    /// Fraction of trials in which every discrete target held at once.
    pub joint_accuracy: Option<f64>,
    /// Largest number of pairwise multiclass moves spent in any trial.
    pub max_multiclass_moves: usize,
}

impl ScoreSet {
    pub fn get(&self, attribute: &str) -> Option<Score> {
        self.scores
            .iter()
            .find(|s| s.attribute == attribute)
            .map(|s| s.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub latent_modification: ScoreSet,
    pub end_to_end: ScoreSet,
    pub cosine: CosineReport,
    pub trials: usize,
    pub seed: u64,
}

/// Random targets: discrete classes uniform, continuous values uniform over
/// the middle 80% of the range.
pub fn random_spec(schema: &[AttributeSchema], rng: &mut impl Rng) -> ConditioningSpec {
    let mut spec = ConditioningSpec::default();
    for attr in schema {
        match &attr.kind {
            AttributeKind::Continuous { lo, hi } => {
                let u: f64 = rng.random();
                spec.continuous_targets
                    .insert(attr.name.clone(), lo + (0.1 + 0.8 * u) * (hi - lo));
            }
            _ => {
                let classes = attr.classes();
                let k = rng.random_range(0..classes.len());
                spec.discrete_targets.insert(attr.name.clone(), classes[k].to_string());
            }
        }
    }
    spec
}

struct TrialOutcome {
    hits: Vec<bool>,
    squared_errors: Vec<f64>,
    multiclass_moves: usize,
}

fn run_trials<F>(bundle: &LatentBundle, cfg: &EvalConfig, judge: F) -> Result<ScoreSet>
where
    F: Fn(&LatentVector) -> Result<AttributeLabels> + Sync,
{
    cfg.validate()?;
    let attrs = bundle.attributes();
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome> {
            let mut rng = stream_rng(cfg.seed, t as u64);
            let z = sample_latent(&mut rng, bundle.dim());
            let spec = random_spec(attrs, &mut rng);
            let (z_prime, moves) = if cfg.repair_rounds == 0 {
                let r = condition(&z, &spec, bundle, &cfg.director)?;
                let moves = r.multiclass_moves.values().copied().max().unwrap_or(0);
                (r.z_prime, moves)
            } else {
                let rounds = condition_with_repair(&z, &spec, bundle, &cfg.director, cfg.repair_rounds)?;
                let moves = rounds
                    .iter()
                    .flat_map(|r| r.multiclass_moves.values().copied())
                    .max()
                    .unwrap_or(0);
                (rounds.last().map(|r| r.z_prime.clone()).unwrap_or(z), moves)
            };
            let labels = judge(&z_prime)?;
            let mut hits = Vec::new();
            let mut squared_errors = Vec::new();
            for attr in attrs {
                if attr.is_discrete() {
                    hits.push(labels.discrete.get(&attr.name) == spec.discrete_targets.get(&attr.name));
                } else {
                    let e = labels.continuous[&attr.name] - spec.continuous_targets[&attr.name];
                    squared_errors.push(e * e);
                }
            }
            Ok(TrialOutcome {
                hits,
                squared_errors,
                multiclass_moves: moves,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let trials = outcomes.len();
    let mut hit_counts = vec![0usize; attrs.iter().filter(|a| a.is_discrete()).count()];
    let mut sq_sums = vec![0.0; attrs.len() - hit_counts.len()];
    let mut joint = 0usize;
    let mut max_moves = 0;
    for o in &outcomes {
        for (c, &h) in hit_counts.iter_mut().zip(&o.hits) {
            *c += h as usize;
        }
        for (s, e) in sq_sums.iter_mut().zip(&o.squared_errors) {
            *s += e;
        }
        joint += o.hits.iter().all(|&h| h) as usize;
        max_moves = max_moves.max(o.multiclass_moves);
    }
    let (mut di, mut ci) = (0, 0);
    let scores = attrs
        .iter()
        .map(|a| {
            let score = if a.is_discrete() {
                di += 1;
                Score::Accuracy(hit_counts[di - 1] as f64 / trials as f64)
            } else {
                ci += 1;
                Score::Rmse((sq_sums[ci - 1] / trials as f64).sqrt())
            };
            AttributeScore {
                attribute: a.name.clone(),
                score,
            }
        })
        .collect();
    Ok(ScoreSet {
        trials,
        seed: cfg.seed,
        scores,
        joint_accuracy: (!hit_counts.is_empty()).then(|| joint as f64 / trials as f64),
        max_multiclass_moves: max_moves,
    })
}

/// Success judged by the latent models that steer the update.
pub fn eval_latent_modification(bundle: &LatentBundle, cfg: &EvalConfig) -> Result<ScoreSet> {
    run_trials(bundle, cfg, |z| {
        let mut labels = AttributeLabels::default();
        for (attr, model) in bundle.iter() {
            if attr.is_discrete() {
                labels
                    .discrete
                    .insert(attr.name.clone(), predict_discrete(model, z)?.to_string());
            } else {
                labels.continuous.insert(attr.name.clone(), predict_value(model, z)?);
            }
        }
        Ok(labels)
    })
}

/// Success judged by rendering `z'` and reading it back with the noise-free
/// oracle.
pub fn eval_end_to_end<W>(bundle: &LatentBundle, world: &W, cfg: &EvalConfig) -> Result<ScoreSet>
where
    W: Generator + AttributeOracle<<W as Generator>::Image>,
{
    if world.latent_dim() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            expected: world.latent_dim(),
            found: bundle.dim(),
        });
    }
    run_trials(bundle, cfg, |z| world.label_exact(&world.generate(z)?))
}

/// Both protocols plus the cosine report, over the same trial streams.
pub fn evaluate<W>(bundle: &LatentBundle, world: &W, cfg: &EvalConfig) -> Result<EvalReport>
where
    W: Generator + AttributeOracle<<W as Generator>::Image>,
{
    let latent = eval_latent_modification(bundle, cfg)?;
    let e2e = eval_end_to_end(bundle, world, cfg)?;
    for (l, e) in latent.scores.iter().zip(&e2e.scores) {
        if let (Score::Accuracy(a), Score::Accuracy(b)) = (l.score, e.score) {
            if a < b {
                log::warn!(
                    "`{}`: latent-modification accuracy {a:.4} below end-to-end {b:.4}",
                    l.attribute
                );
            }
        }
    }
    Ok(EvalReport {
        trials: cfg.trials,
        seed: cfg.seed,
        cosine: cosine_report(bundle)?,
        latent_modification: latent,
        end_to_end: e2e,
    })
}
