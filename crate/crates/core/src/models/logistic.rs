//! Binary logistic regression by full-batch gradient descent.

use super::data::{check_uniform_dims, split_indices, Design};
use super::{BinaryLatentClassifier, ClassifierMeta, TrainingConfig};
use crate::error::{Error, Result};
use crate::latent::{check_dims, dot, Hyperplane, LatentVector};

/// Mean logistic loss plus `l2/2 · ||w||²` (intercept unpenalized).
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Loss and analytic gradient over row-major `rows` (`n × dim`) with 0/1 targets.
pub fn loss_and_gradient(
    rows: &[f64],
    dim: usize,
    targets: &[f64],
    weights: &[f64],
    intercept: f64,
    l2: f64,
) -> Result<LossGradient> {
    check_dims(dim, weights.len())?;
    check_dims(rows.len(), targets.len() * dim)?;
    let n = targets.len();
    let mut grad = vec![0.0; dim];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (x, &y) in rows.chunks_exact(dim).zip(targets) {
        let m = dot(weights, x) + intercept;
        loss += softplus(m) - y * m;
        let r = sigmoid(m) - y;
        grad_b += r;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += r * xi;
        }
    }
    let inv_n = 1.0 / n as f64;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g * inv_n + l2 * w;
    }
    Ok(LossGradient {
        loss: loss * inv_n + 0.5 * l2 * dot(weights, weights),
        weights: grad,
        intercept: grad_b * inv_n,
    })
}

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^m)` without overflow.
pub fn softplus(m: f64) -> f64 {
    m.max(0.0) + (-m.abs()).exp().ln_1p()
}

/// Fits a logistic classifier; `labels[i]` is true for the positive class.
///
/// The model is trained on the seeded stratified train split and scored on
/// the held-out remainder.
pub fn fit_binary(
    latents: &[LatentVector],
    labels: &[bool],
    negative_class: &str,
    positive_class: &str,
    cfg: &TrainingConfig,
) -> Result<BinaryLatentClassifier> {
    cfg.validate()?;
    check_dims(latents.len(), labels.len())?;
    let dim = check_uniform_dims(latents)?;
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives < 2 || negatives < 2 {
        return Err(Error::Unlearnable(format!(
            "need at least 2 samples of each class, got {negatives} `{negative_class}` \
             and {positives} `{positive_class}`"
        )));
    }

    let strata: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let (train, test) = split_indices(labels.len(), cfg.split_fraction, cfg.seed, Some(&strata));
    let design = Design::gather(latents, &train)?;
    let targets: Vec<f64> = train.iter().map(|&i| labels[i] as u8 as f64).collect();

    let mut weights = vec![0.0; dim];
    let mut intercept = 0.0;
    for epoch in 1..=cfg.epochs {
        let g = loss_and_gradient(&design.rows, dim, &targets, &weights, intercept, cfg.l2_penalty)?;
        if !g.loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        for (w, gw) in weights.iter_mut().zip(&g.weights) {
            *w -= cfg.learning_rate * gw;
        }
        intercept -= cfg.learning_rate * g.intercept;
    }
    let final_loss =
        loss_and_gradient(&design.rows, dim, &targets, &weights, intercept, cfg.l2_penalty)?.loss;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Unlearnable("learned direction is zero".into()));
    }

    let hyperplane = Hyperplane::new(weights, intercept)?;
    let correct = test
        .iter()
        .filter(|&&i| (hyperplane.score(latents[i].as_slice()).unwrap_or(0.0) >= 0.0) == labels[i])
        .count();

    Ok(BinaryLatentClassifier {
        hyperplane,
        negative_class: negative_class.into(),
        positive_class: positive_class.into(),
        meta: ClassifierMeta {
            epochs_run: cfg.epochs,
            final_loss,
            test_accuracy: correct as f64 / test.len() as f64,
            train_size: train.len(),
            test_size: test.len(),
        },
    })
}
