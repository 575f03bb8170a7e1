//! Closed-form ridge least squares.

use nalgebra::{DMatrix, DVector};

use super::data::{check_uniform_dims, split_indices, Design};
use super::{LatentRegressor, RegressorMeta, TrainingConfig};
use crate::error::{Error, Result};
use crate::latent::{check_dims, Hyperplane, LatentVector};

/// Ridge added to the diagonal of the augmented Gram matrix.
pub const RIDGE: f64 = 1e-6;

/// Solves `(AᵀA + ridge·I) β = Aᵀy` with `A = [Z | 1]` by Cholesky.
///
/// Returns `(slope, intercept)`.
pub fn ridge_solve(design: &[f64], dim: usize, targets: &[f64], ridge: f64) -> Result<(Vec<f64>, f64)> {
    check_dims(design.len(), targets.len() * dim)?;
    let n = targets.len();
    let a = DMatrix::from_fn(n, dim + 1, |i, j| if j < dim { design[i * dim + j] } else { 1.0 });
    let mut gram = a.tr_mul(&a);
    for j in 0..=dim {
        gram[(j, j)] += ridge;
    }
    let rhs = a.tr_mul(&DVector::from_column_slice(targets));
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::DegenerateModel("regression Gram matrix is not positive definite".into()))?;
    let beta = chol.solve(&rhs);
    Ok((beta.as_slice()[..dim].to_vec(), beta[dim]))
}

pub fn fit_regressor(
    latents: &[LatentVector],
    targets: &[f64],
    cfg: &TrainingConfig,
) -> Result<LatentRegressor> {
    cfg.validate()?;
    check_dims(latents.len(), targets.len())?;
    if targets.len() < 2 {
        return Err(Error::Unlearnable(format!(
            "regression needs at least 2 samples, got {}",
            targets.len()
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("regression targets must be finite".into()));
    }
    let dim = check_uniform_dims(latents)?;
    let (train, test) = split_indices(targets.len(), cfg.split_fraction, cfg.seed, None);
    let design = Design::gather(latents, &train)?;
    let train_targets: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
    let (slope, intercept) = ridge_solve(&design.rows, dim, &train_targets, RIDGE)?;
    let line = Hyperplane::new(slope, intercept)?;

    let sq: f64 = test
        .iter()
        .map(|&i| {
            let e = line.score(latents[i].as_slice()).unwrap_or(f64::NAN) - targets[i];
            e * e
        })
        .sum();
    Ok(LatentRegressor {
        line,
        meta: RegressorMeta {
            test_rmse: (sq / test.len() as f64).sqrt(),
            train_size: train.len(),
            test_size: test.len(),
        },
    })
}
