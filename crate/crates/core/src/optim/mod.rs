//! Black-box maximisers over the unit box and the latent-space baselines.
//!
//! Every optimiser stops on budget exhaustion only. Objective failures use up
//! one evaluation, are recorded with a `NaN` score and never count towards
//! the best-so-far value. Minimisation is expressed by negating the objective.

mod bo;
mod cmaes;
mod gp;
mod random;
mod record;
mod zspace;

use thiserror::Error;

pub use bo::{bo_u, expected_improvement, halton, BoParams};
pub use cmaes::{cmaes_u, Cmaes, CmaesParams, BOX_RESAMPLE_LIMIT};
pub use gp::{Gp, GpError, Hyper, HyperGrid};
pub use random::{random_search_u, random_search_z};
pub use record::{RunRecord, Step};
pub use zspace::{cmaes_z, latent_from_unit, UNIT_CLAMP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ObjectiveError(pub String);

/// A scalar score to maximise.
pub trait Objective {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError>;
}

impl<F: FnMut(&[f64]) -> f64 + ?Sized> Objective for F {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError> {
        Ok(self(point))
    }
}

/// Adapts a closure that can fail.
pub struct Fallible<F>(pub F);

impl<F: FnMut(&[f64]) -> Result<f64, ObjectiveError>> Objective for Fallible<F> {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError> {
        (self.0)(point)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn check_budget(budget: usize) -> Result<(), OptimError> {
    if budget == 0 {
        return Err(OptimError::ZeroBudget);
    }
    Ok(())
}
