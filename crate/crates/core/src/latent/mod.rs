//! Latent distributions, their transports to an amenable inner latent, and
//! the LOL combination map over a set of seeds.
//!
//! Every latent family is mapped to an inner latent `ε` that is zero-mean,
//! rotationally invariant and closed under unit-ℓ2 linear combinations:
//!
//! | family      | `T→(z)`                  | `T←(ε)`                   |
//! |-------------|--------------------------|---------------------------|
//! | Gaussian    | `(z − μ) / scale`        | `μ + scale ⊙ ε`           |
//! | Sphere      | `z`                      | `ε / ‖ε‖`                 |
//! | Scalar CDF  | `Φ⁻¹(F(z_i))`            | `F⁻¹(Φ(ε_i))`             |
//!
//! Composite specs apply the maps block by block.

mod cdf;
pub mod container;
mod seeds;
mod spec;

use thiserror::Error;

pub use cdf::ScalarCdf;
pub use seeds::{RawInverse, SeedSet, ORTHANT_TOL, SPAN_RESIDUAL_TOL, UNIT_NORM_TOL};
pub use spec::{ComponentSpec, LatentSpec, SPHERE_NORM_TOL, ZERO_NORM_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatentError {
    #[error("invalid latent spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },
    #[error("sphere component {component} has norm {norm}, not 1")]
    OffSphere { component: usize, norm: f64 },
    #[error("coordinate {index} value {value} is outside the scalar cdf support")]
    CdfDomain { index: usize, value: f64 },
    #[error("sphere component {component} has zero norm")]
    ZeroVector { component: usize },
    #[error("weights must have unit norm, got {norm}")]
    NotUnitNorm { norm: f64 },
    #[error("latent is not in the span of the seeds (relative residual {residual:e})")]
    NotInSpan { residual: f64 },
    #[error("recovered weight vector is zero")]
    ZeroWeight,
    #[error("recovered weights leave the positive orthant (min {min_weight})")]
    OutsideOrthant { min_weight: f64 },
    #[error("seed index {index} out of range for {len} seeds")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("seed inner latents are rank deficient: rank {rank} < K = {k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("pseudoinverse is not a left inverse (deviation {deviation:e})")]
    IllConditioned { deviation: f64 },
    #[error("container: {0}")]
    Container(String),
}
