//! A synthetic generator with known ground truth.
//!
//! Every binary or continuous attribute owns one unit direction `g` in latent
//! space, every multiclass attribute one direction per class. Attribute values
//! are threshold / argmax / clamp / sigmoid functions of `gain·g·z + offset`.
//! Directions are realized with a prescribed Gram matrix (the entanglement),
//! so inter-attribute cosines are controlled exactly.
//!
//! The generated "image" is a strip of 8×8 blocks, one per attribute plus a
//! texture block, and the oracle reads attributes back from block means.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{check_dims, dot, stream_rng, LatentVector, MIN_LATENT_DIM};
use crate::models::{
    argmax, logistic::sigmoid, AttributeKind, AttributeSchema, BinaryLatentClassifier,
    ClassifierMeta, LatentBundle, LatentModel, LatentRegressor, MultiClassLatentClassifier,
    RegressorMeta,
};

pub const BLOCK: usize = 8;
const PSD_TOLERANCE: f64 = 1e-9;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
const ORACLE_STREAM: u64 = 0x0_4ac1e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousProfile {
    #[default]
    Linear,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dim: usize,
    pub attributes: Vec<AttributeSchema>,
    /// Target Gram matrix over ground-truth directions; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entanglement: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default)]
    pub continuous_profile: ContinuousProfile,
    #[serde(default)]
    pub seed: u64,
    /// Per-direction score offsets; zeros when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offsets: Vec<f64>,
    /// Per-direction score gains; ones when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gains: Vec<f64>,
}

impl WorldConfig {
    pub fn new(dim: usize, attributes: Vec<AttributeSchema>, seed: u64) -> Self {
        Self {
            dim,
            attributes,
            entanglement: None,
            label_noise: 0.0,
            continuous_profile: ContinuousProfile::Linear,
            seed,
            offsets: Vec::new(),
            gains: Vec::new(),
        }
    }

    pub fn with_entanglement(mut self, matrix: Vec<Vec<f64>>) -> Self {
        self.entanglement = Some(matrix);
        self
    }

    pub fn direction_count(&self) -> usize {
        self.attributes.iter().map(AttributeSchema::direction_count).sum()
    }

    pub fn entanglement_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.direction_count();
        self.entanglement.clone().unwrap_or_else(|| {
            (0..m)
                .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < MIN_LATENT_DIM {
            return Err(Error::Config(format!(
                "dim must be at least {MIN_LATENT_DIM}, got {}",
                self.dim
            )));
        }
        if self.attributes.is_empty() {
            return Err(Error::Config("world needs at least one attribute".into()));
        }
        let mut names = BTreeSet::new();
        for a in &self.attributes {
            a.validate()?;
            if !names.insert(&a.name) {
                return Err(Error::Config(format!("duplicate attribute `{}`", a.name)));
            }
        }
        let m = self.direction_count();
        if m > self.dim {
            return Err(Error::Config(format!(
                "{m} ground-truth directions do not fit in dimension {}",
                self.dim
            )));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise must lie in [0, 0.5), got {}",
                self.label_noise
            )));
        }
        for (field, values) in [("offsets", &self.offsets), ("gains", &self.gains)] {
            if !values.is_empty() && values.len() != m {
                return Err(Error::Config(format!(
                    "{field} has {} entries, expected {m}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{field} must be finite")));
            }
        }
        if self.gains.iter().any(|&g| g <= 0.0) {
            return Err(Error::Config("gains must be positive".into()));
        }
        check_gram(&self.entanglement_matrix(), m)
    }
}

fn check_gram(g: &[Vec<f64>], m: usize) -> Result<()> {
    if g.len() != m || g.iter().any(|row| row.len() != m) {
        return Err(Error::Config(format!(
            "entanglement matrix must be {m}×{m} (one row per ground-truth direction)"
        )));
    }
    for i in 0..m {
        if !g[i].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("entanglement matrix has non-finite entries".into()));
        }
        if (g[i][i] - 1.0).abs() > SYMMETRY_TOLERANCE {
            return Err(Error::Config(format!(
                "entanglement matrix diagonal entry {i} is {}, expected 1",
                g[i][i]
            )));
        }
        for j in 0..i {
            if (g[i][j] - g[j][i]).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::Config(format!(
                    "entanglement matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let min = min_eigenvalue(g);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemiDefinite { eigenvalue: min });
    }
    Ok(())
}

fn to_matrix(g: &[Vec<f64>]) -> DMatrix<f64> {
    let m = g.len();
    DMatrix::from_fn(m, m, |i, j| g[i][j])
}

fn min_eigenvalue(g: &[Vec<f64>]) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(to_matrix(g))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A factor `F` with `F Fᵀ = G`: the Cholesky factor, or the eigen square
/// root when `G` is only semi-definite.
fn gram_factor(g: &[Vec<f64>]) -> DMatrix<f64> {
    let gm = to_matrix(g);
    if let Some(chol) = gm.clone().cholesky() {
        return chol.l();
    }
    let eig = SymmetricEigen::new(gm);
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * roots
}

/// Attribute readings for one image (or one latent).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeLabels {
    pub discrete: BTreeMap<String, String>,
    pub continuous: BTreeMap<String, f64>,
}

/// Block-strip image, row-major, `values ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl SyntheticImage {
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Layout(format!(
                "{} pixels for a {width}×{height} grid",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn block_count(&self) -> usize {
        self.width / BLOCK
    }

    pub fn block_mean(&self, block: usize) -> f64 {
        let mut sum = 0.0;
        for row in 0..self.height {
            let start = row * self.width + block * BLOCK;
            sum += self.pixels[start..start + BLOCK].iter().sum::<f64>();
        }
        sum / (BLOCK * self.height) as f64
    }

    /// ASCII PGM (P2, maxval 255), pixel = round(value·255).
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks_exact(self.width) {
            let line: Vec<String> = row
                .iter()
                .map(|v| ((v.clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Maps latents to images.
pub trait Generator: Sync {
    type Image: Send;

    fn latent_dim(&self) -> usize;

    /// Seed the generator was built from, recorded in training provenance.
    fn seed(&self) -> Option<u64> {
        None
    }

    fn generate(&self, z: &LatentVector) -> Result<Self::Image>;
}

/// Labels images with attribute values (the image-attribute block).
pub trait AttributeOracle<I>: Sync {
    fn schema(&self) -> &[AttributeSchema];

    /// Labels with the configured classifier noise, drawn from `noise_seed`.
    fn label(&self, image: &I, noise_seed: u64) -> Result<AttributeLabels>;

    /// Labels without noise.
    fn label_exact(&self, image: &I) -> Result<AttributeLabels>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    config: WorldConfig,
    directions: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    gains: Vec<f64>,
}

pub fn build_world(cfg: WorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let m = cfg.direction_count();
    let dim = cfg.dim;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gaussian = DMatrix::from_fn(dim, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let basis = gaussian.qr().q();
    let factor = gram_factor(&cfg.entanglement_matrix());

    let directions = (0..m)
        .map(|i| {
            // g_i = Σ_j F_ij q_j, so g_i · g_k = (F Fᵀ)_ik
            let mut g = vec![0.0; dim];
            for j in 0..m {
                let w = factor[(i, j)];
                if w == 0.0 {
                    continue;
                }
                for (r, gv) in g.iter_mut().enumerate() {
                    *gv += w * basis[(r, j)];
                }
            }
            let n = dot(&g, &g).sqrt();
            g.iter().map(|v| v / n).collect()
        })
        .collect();

    let offsets = if cfg.offsets.is_empty() {
        vec![0.0; m]
    } else {
        cfg.offsets.clone()
    };
    let gains = if cfg.gains.is_empty() {
        vec![1.0; m]
    } else {
        cfg.gains.clone()
    };
    Ok(SyntheticWorld {
        config: cfg,
        directions,
        offsets,
        gains,
    })
}

impl SyntheticWorld {
    /// Rebuilds a world from realized directions (e.g. read from disk),
    /// re-checking every invariant.
    pub fn from_parts(
        config: WorldConfig,
        directions: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        gains: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let m = config.direction_count();
        if directions.len() != m || offsets.len() != m || gains.len() != m {
            return Err(Error::Config(format!(
                "world needs {m} directions, offsets and gains"
            )));
        }
        for d in &directions {
            check_dims(config.dim, d.len())?;
            let n = dot(d, d).sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("ground-truth direction has norm {n}")));
            }
        }
        if gains.iter().any(|&g| !(g > 0.0 && g.is_finite())) || offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("gains must be positive and offsets finite".into()));
        }
        Ok(Self {
            config,
            directions,
            offsets,
            gains,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.config.attributes
    }

    /// Unit ground-truth directions in schema order (multiclass attributes
    /// contribute one per class).
    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Index of the first direction belonging to each attribute.
    fn direction_starts(&self) -> Vec<usize> {
        let mut start = 0;
        self.attributes()
            .iter()
            .map(|a| {
                let s = start;
                start += a.direction_count();
                s
            })
            .collect()
    }

    /// Directions owned by attribute `name`.
    pub fn attribute_directions(&self, name: &str) -> Option<&[Vec<f64>]> {
        let starts = self.direction_starts();
        self.attributes()
            .iter()
            .position(|a| a.name == name)
            .map(|i| &self.directions[starts[i]..starts[i] + self.attributes()[i].direction_count()])
    }

    /// Realized Gram matrix of the ground-truth directions.
    pub fn realized_entanglement(&self) -> Vec<Vec<f64>> {
        self.directions
            .iter()
            .map(|a| self.directions.iter().map(|b| dot(a, b)).collect())
            .collect()
    }

    fn score(&self, j: usize, z: &[f64]) -> f64 {
        self.gains[j] * dot(&self.directions[j], z) + self.offsets[j]
    }

    /// Noise-free attribute values of `z`, straight from the ground truth.
    pub fn attribute_values(&self, z: &LatentVector) -> Result<AttributeLabels> {
        check_dims(self.dim(), z.dim())?;
        let z = z.as_slice();
        let mut labels = AttributeLabels::default();
        for (attr, start) in self.attributes().iter().zip(self.direction_starts()) {
            match &attr.kind {
                AttributeKind::Binary { negative, positive } => {
                    let class = if self.score(start, z) > 0.0 { positive } else { negative };
                    labels.discrete.insert(attr.name.clone(), class.clone());
                }
                AttributeKind::Multiclass { classes } => {
                    let scores: Vec<f64> = (0..classes.len()).map(|j| self.score(start + j, z)).collect();
                    labels
                        .discrete
                        .insert(attr.name.clone(), classes[argmax(&scores)].clone());
                }
                AttributeKind::Continuous { lo, hi } => {
                    let s = self.score(start, z);
                    let v = match self.config.continuous_profile {
                        ContinuousProfile::Linear => s.clamp(*lo, *hi),
                        ContinuousProfile::Sigmoid => lo + (hi - lo) * sigmoid(s),
                    };
                    labels.continuous.insert(attr.name.clone(), v);
                }
            }
        }
        Ok(labels)
    }

    /// The exact latent models implied by the ground truth.
    ///
    /// For the sigmoid profile the regressor is only the linear part of the
    /// true map.
    pub fn ground_truth_bundle(&self) -> Result<LatentBundle> {
        let meta = ClassifierMeta {
            epochs_run: 0,
            final_loss: 0.0,
            test_accuracy: 1.0,
            train_size: 0,
            test_size: 0,
        };
        let scaled = |j: usize| -> Vec<f64> {
            self.directions[j].iter().map(|v| v * self.gains[j]).collect()
        };
        let mut models = BTreeMap::new();
        for (attr, start) in self.attributes().iter().zip(self.direction_starts()) {
            let model = match &attr.kind {
                AttributeKind::Binary { negative, positive } => {
                    LatentModel::Binary(BinaryLatentClassifier {
                        hyperplane: crate::latent::Hyperplane::new(scaled(start), self.offsets[start])?,
                        negative_class: negative.clone(),
                        positive_class: positive.clone(),
                        meta: meta.clone(),
                    })
                }
                AttributeKind::Multiclass { classes } => {
                    LatentModel::Multiclass(MultiClassLatentClassifier {
                        class_names: classes.clone(),
                        class_weights: (0..classes.len()).map(|j| scaled(start + j)).collect(),
                        class_intercepts: self.offsets[start..start + classes.len()].to_vec(),
                        meta: meta.clone(),
                    })
                }
                AttributeKind::Continuous { .. } => LatentModel::Regressor(LatentRegressor {
                    line: crate::latent::Hyperplane::new(scaled(start), self.offsets[start])?,
                    meta: RegressorMeta {
                        test_rmse: 0.0,
                        train_size: 0,
                        test_size: 0,
                    },
                }),
            };
            models.insert(attr.name.clone(), model);
        }
        LatentBundle::new(self.dim(), self.attributes().to_vec(), models)
    }

    pub fn generate_image(&self, z: &LatentVector) -> Result<SyntheticImage> {
        let values = self.attribute_values(z)?;
        let blocks = self.attributes().len() + 1;
        let width = blocks * BLOCK;
        let mut pixels = vec![0.0; width * BLOCK];
        for (b, attr) in self.attributes().iter().enumerate() {
            let level = match &attr.kind {
                AttributeKind::Binary { positive, .. } => {
                    if &values.discrete[&attr.name] == positive {
                        1.0
                    } else {
                        0.0
                    }
                }
                AttributeKind::Multiclass { classes } => {
                    let idx = attr.class_index(&values.discrete[&attr.name])?;
                    idx as f64 / (classes.len() - 1) as f64
                }
                AttributeKind::Continuous { lo, hi } => {
                    ((values.continuous[&attr.name] - lo) / (hi - lo)).clamp(0.0, 1.0)
                }
            };
            fill_block(&mut pixels, width, b, |_| level);
        }
        let mut texture = ChaCha8Rng::seed_from_u64(fnv1a(z.as_slice()));
        let noise: Vec<f64> = (0..BLOCK * BLOCK).map(|_| texture.random::<f64>()).collect();
        fill_block(&mut pixels, width, blocks - 1, |i| noise[i]);
        SyntheticImage::from_pixels(width, BLOCK, pixels)
    }

    fn check_layout(&self, image: &SyntheticImage) -> Result<()> {
        let blocks = self.attributes().len() + 1;
        if image.height != BLOCK || image.width != blocks * BLOCK {
            return Err(Error::Layout(format!(
                "expected a {}×{BLOCK} strip of {blocks} blocks, got {}×{}",
                blocks * BLOCK,
                image.width,
                image.height
            )));
        }
        if image.pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Layout("pixel values outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Reads attributes back from block means and applies label noise with
    /// probability `noise` per discrete attribute.
    pub fn read_labels(&self, image: &SyntheticImage, noise: f64, noise_seed: u64) -> Result<AttributeLabels> {
        self.check_layout(image)?;
        let mut rng = stream_rng(noise_seed, ORACLE_STREAM);
        let mut labels = AttributeLabels::default();
        for (b, attr) in self.attributes().iter().enumerate() {
            let mean = image.block_mean(b);
            match &attr.kind {
                AttributeKind::Binary { negative, positive } => {
                    let mut is_pos = mean >= 0.5;
                    if rng.random::<f64>() < noise {
                        is_pos = !is_pos;
                    }
                    let class = if is_pos { positive } else { negative };
                    labels.discrete.insert(attr.name.clone(), class.clone());
                }
                AttributeKind::Multiclass { classes } => {
                    let k = classes.len();
                    let mut idx = ((mean * (k - 1) as f64).round() as usize).min(k - 1);
                    if rng.random::<f64>() < noise {
                        let other = rng.random_range(0..k - 1);
                        idx = if other >= idx { other + 1 } else { other };
                    }
                    labels.discrete.insert(attr.name.clone(), classes[idx].clone());
                }
                AttributeKind::Continuous { lo, hi } => {
                    labels.continuous.insert(attr.name.clone(), lo + mean * (hi - lo));
                }
            }
        }
        Ok(labels)
    }

    /// Oracle labels with the world's configured label noise.
    pub fn oracle_label(&self, image: &SyntheticImage, noise_seed: u64) -> Result<AttributeLabels> {
        self.read_labels(image, self.config.label_noise, noise_seed)
    }
}

impl Generator for SyntheticWorld {
    type Image = SyntheticImage;

    fn latent_dim(&self) -> usize {
        self.dim()
    }

    fn seed(&self) -> Option<u64> {
        Some(self.config.seed)
    }

    fn generate(&self, z: &LatentVector) -> Result<SyntheticImage> {
        self.generate_image(z)
    }
}

impl AttributeOracle<SyntheticImage> for SyntheticWorld {
    fn schema(&self) -> &[AttributeSchema] {
        self.attributes()
    }

    fn label(&self, image: &SyntheticImage, noise_seed: u64) -> Result<AttributeLabels> {
        self.oracle_label(image, noise_seed)
    }

    fn label_exact(&self, image: &SyntheticImage) -> Result<AttributeLabels> {
        self.read_labels(image, 0.0, 0)
    }
}

fn fill_block(pixels: &mut [f64], width: usize, block: usize, value: impl Fn(usize) -> f64) {
    for row in 0..BLOCK {
        for col in 0..BLOCK {
            pixels[row * width + block * BLOCK + col] = value(row * BLOCK + col);
        }
    }
}

fn fnv1a(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
