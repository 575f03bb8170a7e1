//! Multinomial logistic (softmax) regression by full-batch gradient descent.

use super::data::{check_uniform_dims, split_indices, Design};
use super::{argmax, ClassifierMeta, MultiClassLatentClassifier, TrainingConfig};
use crate::error::{Error, Result};
use crate::latent::{check_dims, dot, LatentVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxGradient {
    pub loss: f64,
    /// `k × dim`, row-major.
    pub weights: Vec<f64>,
    pub intercepts: Vec<f64>,
}

/// Mean cross-entropy plus `l2/2 · Σ||w_j||²` and its gradient.
///
/// `weights` is `k × dim` row-major; `labels` hold class indices `< k`.
pub fn loss_and_gradient(
    rows: &[f64],
    dim: usize,
    labels: &[usize],
    weights: &[f64],
    intercepts: &[f64],
    l2: f64,
) -> Result<SoftmaxGradient> {
    let k = intercepts.len();
    check_dims(k * dim, weights.len())?;
    check_dims(rows.len(), labels.len() * dim)?;
    let n = labels.len();
    let mut grad = vec![0.0; k * dim];
    let mut grad_b = vec![0.0; k];
    let mut loss = 0.0;
    let mut scores = vec![0.0; k];
    for (x, &y) in rows.chunks_exact(dim).zip(labels) {
        for (j, s) in scores.iter_mut().enumerate() {
            *s = dot(&weights[j * dim..(j + 1) * dim], x) + intercepts[j];
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        loss += max + total.ln() - scores[y];
        for j in 0..k {
            let p = (scores[j] - max).exp() / total;
            let r = p - if j == y { 1.0 } else { 0.0 };
            grad_b[j] += r;
            for (g, xi) in grad[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                *g += r * xi;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g * inv_n + l2 * w;
    }
    for g in &mut grad_b {
        *g *= inv_n;
    }
    Ok(SoftmaxGradient {
        loss: loss * inv_n + 0.5 * l2 * dot(weights, weights),
        weights: grad,
        intercepts: grad_b,
    })
}

/// Fits a `k`-class softmax model; `labels[i]` indexes `class_names`.
pub fn fit_multiclass(
    latents: &[LatentVector],
    labels: &[usize],
    class_names: &[String],
    cfg: &TrainingConfig,
) -> Result<MultiClassLatentClassifier> {
    cfg.validate()?;
    check_dims(latents.len(), labels.len())?;
    let dim = check_uniform_dims(latents)?;
    let k = class_names.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {k}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!("label index {bad} out of range for {k} classes")));
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(j) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Unlearnable(format!(
            "class `{}` has {} samples, need at least 2",
            class_names[j], counts[j]
        )));
    }

    let (train, test) = split_indices(labels.len(), cfg.split_fraction, cfg.seed, Some(labels));
    let design = Design::gather(latents, &train)?;
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();

    let mut weights = vec![0.0; k * dim];
    let mut intercepts = vec![0.0; k];
    for epoch in 1..=cfg.epochs {
        let g = loss_and_gradient(&design.rows, dim, &train_labels, &weights, &intercepts, cfg.l2_penalty)?;
        if !g.loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        for (w, gw) in weights.iter_mut().zip(&g.weights) {
            *w -= cfg.learning_rate * gw;
        }
        for (b, gb) in intercepts.iter_mut().zip(&g.intercepts) {
            *b -= cfg.learning_rate * gb;
        }
    }
    let final_loss =
        loss_and_gradient(&design.rows, dim, &train_labels, &weights, &intercepts, cfg.l2_penalty)?.loss;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }

    let class_weights: Vec<Vec<f64>> = weights.chunks_exact(dim).map(<[f64]>::to_vec).collect();
    let mut model = MultiClassLatentClassifier {
        class_names: class_names.to_vec(),
        class_weights,
        class_intercepts: intercepts,
        meta: ClassifierMeta {
            epochs_run: cfg.epochs,
            final_loss,
            test_accuracy: 0.0,
            train_size: train.len(),
            test_size: test.len(),
        },
    };
    let correct = test
        .iter()
        .filter(|&&i| {
            model
                .scores(latents[i].as_slice())
                .map(|s| argmax(&s) == labels[i])
                .unwrap_or(false)
        })
        .count();
    model.meta.test_accuracy = correct as f64 / test.len() as f64;
    Ok(model)
}
