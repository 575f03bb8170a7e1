use rand::Rng;

use crate::error::{Error, Result};
use crate::latent::{check_dims, stream_rng, LatentVector};

const SPLIT_STREAM: u64 = 0x5317;

/// Row-major copy of a latent sample, the layout the fitters iterate over.
pub(crate) struct Design {
    pub rows: Vec<f64>,
}

impl Design {
    pub fn gather(latents: &[LatentVector], indices: &[usize]) -> Result<Self> {
        let dim = latents
            .first()
            .map(LatentVector::dim)
            .ok_or_else(|| Error::InvalidArgument("no latent samples".into()))?;
        let mut rows = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            check_dims(dim, latents[i].dim())?;
            rows.extend_from_slice(latents[i].as_slice());
        }
        Ok(Self { rows })
    }
}

pub(crate) fn check_uniform_dims(latents: &[LatentVector]) -> Result<usize> {
    let dim = latents
        .first()
        .map(LatentVector::dim)
        .ok_or_else(|| Error::InvalidArgument("no latent samples".into()))?;
    for z in latents {
        check_dims(dim, z.dim())?;
    }
    Ok(dim)
}

/// Seeded train/test split over `n` samples.
///
/// With `strata`, each stratum is split separately and keeps at least one
/// sample on each side (strata need two or more members). Assignment depends
/// only on per-sample random keys, so relabelling strata does not change it.
/// Both index lists come back sorted.
pub fn split_indices(
    n: usize,
    fraction: f64,
    seed: u64,
    strata: Option<&[usize]>,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream_rng(seed, SPLIT_STREAM);
    let keys: Vec<u64> = (0..n).map(|_| rng.random()).collect();

    let groups: Vec<Vec<usize>> = match strata {
        None => vec![(0..n).collect()],
        Some(labels) => {
            let k = labels.iter().copied().max().map_or(0, |m| m + 1);
            let mut groups = vec![Vec::new(); k];
            for (i, &l) in labels.iter().enumerate() {
                groups[l].push(i);
            }
            groups
        }
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups {
        if group.is_empty() {
            continue;
        }
        group.sort_by_key(|&i| (keys[i], i));
        let len = group.len();
        let mut take = (fraction * len as f64).round() as usize;
        if len >= 2 {
            take = take.clamp(1, len - 1);
        }
        train.extend_from_slice(&group[..take]);
        test.extend_from_slice(&group[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
