//! Attribute conditioning for latent-variable generators.
//!
//! Linear models are fit over a generator's latent space (one hyperplane per
//! binary attribute, a softmax per multiclass attribute, a regression line
//! per continuous attribute). A latent is then moved in one closed-form step
//! to the side of each boundary, or the point on each line, that the caller
//! asks for. A synthetic generator with known attribute directions provides
//! exact labels for training and evaluation.

pub mod cli;
pub mod director;
pub mod error;
pub mod eval;
pub mod io;
pub mod latent;
pub mod models;
pub mod world;

pub use director::{condition, ConditioningSpec, DirectorConfig, UpdateReport};
pub use error::{Error, Result};
pub use latent::{Hyperplane, LatentVector};
pub use models::{AttributeSchema, LatentBundle, LatentModel, TrainingConfig};
pub use world::{build_world, SyntheticWorld, WorldConfig};
