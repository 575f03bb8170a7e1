//! Latent-space primitives: vectors, hyperplanes and the signed-distance
//! geometry every conditioning move is built from.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_LATENT_DIM: usize = 2;

/// Tolerance used when checking that rows of a [`DirectionMatrix`] are unit.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// A point in the generator's latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_LATENT_DIM {
            return Err(Error::InvalidArgument(format!(
                "latent dimension must be at least {MIN_LATENT_DIM}, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "latent coordinate {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Returns `self + scale * direction`.
    pub fn offset(&self, direction: &[f64], scale: f64) -> Result<Self> {
        check_dims(self.dim(), direction.len())?;
        let values = self
            .0
            .iter()
            .zip(direction)
            .map(|(z, d)| z + scale * d)
            .collect();
        Self::new(values)
    }
}

impl TryFrom<Vec<f64>> for LatentVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LatentVector> for Vec<f64> {
    fn from(z: LatentVector) -> Self {
        z.0
    }
}

impl AsRef<[f64]> for LatentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The set `direction · x + intercept = 0`.
///
/// Construction only checks finiteness; a zero direction is representable
/// (a regression line with zero slope is legitimate) but every geometric
/// operation that needs a normal rejects it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHyperplane")]
pub struct Hyperplane {
    direction: Vec<f64>,
    intercept: f64,
}

#[derive(Deserialize)]
struct RawHyperplane {
    direction: Vec<f64>,
    intercept: f64,
}

impl TryFrom<RawHyperplane> for Hyperplane {
    type Error = Error;

    fn try_from(raw: RawHyperplane) -> Result<Self> {
        Self::new(raw.direction, raw.intercept)
    }
}

impl Hyperplane {
    pub fn new(direction: Vec<f64>, intercept: f64) -> Result<Self> {
        if direction.is_empty() {
            return Err(Error::InvalidArgument("hyperplane direction is empty".into()));
        }
        if !intercept.is_finite() || direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "hyperplane has non-finite coefficients".into(),
            ));
        }
        Ok(Self {
            direction,
            intercept,
        })
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.direction)
    }

    /// `direction · z + intercept`.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        check_dims(self.dim(), z.len())?;
        Ok(dot(&self.direction, z) + self.intercept)
    }

    /// Jointly rescales direction and intercept.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.direction.iter().map(|v| v * lambda).collect(),
            self.intercept * lambda,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Discrete,
    Continuous,
}

/// Stacked unit directions, one row per attribute of a given kind.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMatrix {
    rows: Vec<Vec<f64>>,
    kind: DirectionKind,
}

impl DirectionMatrix {
    pub fn new(rows: Vec<Vec<f64>>, kind: DirectionKind) -> Result<Self> {
        if let Some(first) = rows.first() {
            let dim = first.len();
            for (i, row) in rows.iter().enumerate() {
                check_dims(dim, row.len())?;
                let n = norm(row);
                if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                    return Err(Error::InvalidArgument(format!(
                        "direction row {i} has norm {n}, expected 1"
                    )));
                }
            }
        }
        Ok(Self { rows, kind })
    }

    /// Normalizes each hyperplane's direction into a row.
    pub fn from_hyperplanes<'a>(
        planes: impl IntoIterator<Item = &'a Hyperplane>,
        kind: DirectionKind,
    ) -> Result<Self> {
        let rows = planes
            .into_iter()
            .map(unit_direction)
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, kind)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row-vector product `weights × D`, a latent-space displacement.
    pub fn combine(&self, weights: &[f64], dim: usize) -> Result<Vec<f64>> {
        check_dims(self.rows.len(), weights.len())?;
        let mut out = vec![0.0; dim];
        for (row, &w) in self.rows.iter().zip(weights) {
            check_dims(dim, row.len())?;
            if w == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
        Ok(out)
    }
}

/// Signed distance `s = -(d·z + b) / ||d||`.
///
/// The minus sign makes `z + s·d̂` the orthogonal projection of `z` onto the
/// hyperplane; a negative score yields a positive distance.
pub fn signed_distance(z: &LatentVector, h: &Hyperplane) -> Result<f64> {
    let score = h.score(z.as_slice())?;
    let n = h.norm();
    if n == 0.0 {
        return Err(Error::DegenerateModel(
            "hyperplane direction has zero norm".into(),
        ));
    }
    Ok(-score / n)
}

pub fn unit_direction(h: &Hyperplane) -> Result<Vec<f64>> {
    unit_vector(h.direction())
}

pub fn unit_vector(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateModel(format!(
            "cannot normalize vector with norm {n}"
        )));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateModel(
            "cosine similarity of a zero vector".into(),
        ));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Pairwise cosine similarities; the diagonal is exactly 1.
pub fn cosine_matrix(vectors: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let n = vectors.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in (i + 1)..n {
            let c = cosine_similarity(vectors[i], vectors[j])?;
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    Ok(m)
}

/// Draws `count` latents with i.i.d. standard-normal coordinates.
pub fn sample_latents(count: usize, dim: usize, seed: u64) -> Result<Vec<LatentVector>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if dim < MIN_LATENT_DIM {
        return Err(Error::InvalidArgument(format!(
            "latent dimension must be at least {MIN_LATENT_DIM}, got {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sample_latent(&mut rng, dim)).collect())
}

pub(crate) fn sample_latent(rng: &mut impl rand::Rng, dim: usize) -> LatentVector {
    LatentVector((0..dim).map(|_| StandardNormal.sample(rng)).collect())
}

/// Independent RNG stream for item `stream` under `seed`; results do not
/// depend on the order in which streams are consumed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a base seed with a tag into an unrelated 64-bit seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn z(v: &[f64]) -> LatentVector {
        LatentVector::new(v.to_vec()).unwrap()
    }

    fn plane(d: &[f64], b: f64) -> Hyperplane {
        Hyperplane::new(d.to_vec(), b).unwrap()
    }

    #[test]
    fn signed_distance_examples() {
        assert_eq!(signed_distance(&z(&[-2.0, 3.0]), &plane(&[1.0, 0.0], 0.0)).unwrap(), 2.0);
        let s = signed_distance(&z(&[1.0, 1.0]), &plane(&[3.0, 4.0], 0.0)).unwrap();
        assert_abs_diff_eq!(s, -1.4, epsilon = 1e-15);
        // (1, 1) lies on x + y - 2 = 0
        let s = signed_distance(&z(&[1.0, 1.0]), &plane(&[1.0, 1.0], -2.0)).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn signed_distance_dimension_mismatch_names_both() {
        let err = signed_distance(&z(&[1.0, 2.0, 3.0]), &plane(&[1.0, 0.0], 0.0)).unwrap_err();
        match err {
            Error::DimensionMismatch { expected, found } => {
                assert_eq!((expected, found), (2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn signed_distance_rejects_zero_direction() {
        let err = signed_distance(&z(&[1.0, 2.0]), &plane(&[0.0, 0.0], 1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateModel(_)));
    }

    #[test]
    fn unit_direction_examples() {
        let u = unit_direction(&plane(&[3.0, 4.0], 0.0)).unwrap();
        assert_abs_diff_eq!(u[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1], 0.8, epsilon = 1e-15);
        assert_eq!(unit_direction(&plane(&[1.0, 0.0], 0.0)).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(
            unit_direction(&plane(&[0.0, 0.0], 0.0)),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        let v = [0.3, -2.0, 7.5];
        assert_abs_diff_eq!(cosine_similarity(&v, &v).unwrap(), 1.0, epsilon = 1e-15);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_standard_normal() {
        let a = sample_latents(10_000, 64, 7).unwrap();
        assert_eq!(a, sample_latents(10_000, 64, 7).unwrap());
        for j in 0..64 {
            let col: Vec<f64> = a.iter().map(|z| z.as_slice()[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!((-0.05..=0.05).contains(&mean), "coordinate {j} mean {mean}");
            assert!((0.9..=1.1).contains(&var), "coordinate {j} variance {var}");
        }
    }

    #[test]
    fn sampling_rejects_empty_request() {
        assert!(matches!(sample_latents(0, 8, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn latent_vector_validation() {
        assert!(LatentVector::new(vec![1.0]).is_err());
        assert!(LatentVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(LatentVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn direction_matrix_requires_unit_rows() {
        assert!(DirectionMatrix::new(vec![vec![1.0, 1.0]], DirectionKind::Discrete).is_err());
        let m = DirectionMatrix::from_hyperplanes(
            [&plane(&[3.0, 4.0], 1.0), &plane(&[0.0, 2.0], 0.0)],
            DirectionKind::Discrete,
        )
        .unwrap();
        let moved = m.combine(&[1.0, 2.0], 2).unwrap();
        assert_abs_diff_eq!(moved[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(moved[1], 2.8, epsilon = 1e-15);
    }

    #[test]
    fn cosine_matrix_single_entry() {
        let v = [1.0, 2.0];
        assert_eq!(cosine_matrix(&[&v]).unwrap(), vec![vec![1.0]]);
    }
}
