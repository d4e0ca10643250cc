//! Latent-space baseline: CMA-ES on `[0,1]^D` pushed through `Φ⁻¹` coordinatewise.

use super::cmaes::Cmaes;
use super::{check_budget, CmaesParams, Objective, OptimError, RunRecord};
use crate::latent::{LatentError, LatentSpec};
use crate::special::norm_ppf;

/// Unit coordinates are clamped to `[UNIT_CLAMP, 1 − UNIT_CLAMP]` before `Φ⁻¹`.
pub const UNIT_CLAMP: f64 = 1e-12;

/// `ε_i = Φ⁻¹(u_i)` then the spec's inverse transport: `μ + scale·ε` for
/// Gaussian blocks, `ε/‖ε‖` for sphere blocks, `F⁻¹(Φ(ε))` for CDF blocks.
pub fn latent_from_unit(spec: &LatentSpec, u: &[f64]) -> Result<Vec<f64>, LatentError> {
    if u.len() != spec.total_dim() {
        return Err(LatentError::DimensionMismatch { expected: spec.total_dim(), got: u.len() });
    }
    let eps: Vec<f64> = u.iter().map(|&v| norm_ppf(v.clamp(UNIT_CLAMP, 1.0 - UNIT_CLAMP))).collect();
    spec.from_inner(&eps)
}

/// The recorded points are the latents handed to the objective.
pub fn cmaes_z<O: Objective + ?Sized>(
    objective: &mut O,
    spec: &LatentSpec,
    budget: usize,
    rng_seed: u64,
    params: CmaesParams,
) -> Result<RunRecord, OptimError> {
    check_budget(budget)?;
    let mut es = Cmaes::new(spec.total_dim(), params, rng_seed)?;
    let mut record = RunRecord::new(rng_seed);
    while record.len() < budget {
        let candidates = es.ask();
        let remaining = budget - record.len();
        let fitness: Vec<f64> = candidates
            .iter()
            .take(remaining)
            .map(|c| match latent_from_unit(spec, c) {
                Ok(z) => record.evaluate(objective, z),
                // e.g. a sphere block whose Φ⁻¹ image is the zero vector
                Err(e) => record.push(c.clone(), Err(super::ObjectiveError(e.to_string()))),
            })
            .collect();
        if fitness.len() == candidates.len() {
            es.tell(&candidates, &fitness);
        }
    }
    Ok(record)
}
