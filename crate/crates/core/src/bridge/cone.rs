//! Synthetic cone objective: cosine similarity to a hidden inner latent.
//!
//! Seeds are informative but incomplete: each seed's inner latent is
//! `c_k ε* + √(1 − c_k²) η_k`, where `η_k` is noise orthogonalised against
//! `ε*` and rescaled to `‖ε*‖`, so `cos(ε_k, ε*) = c_k` exactly with
//! `c_k ~ U[0.3, 0.6]`. Sphere blocks of the target are taken at unit
//! length so that the target is itself a latent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::protocol::RequestKind;
use super::serve::Generator;
use super::BridgeError;
use crate::charts::WeightVector;
use crate::latent::{LatentSpec, SeedSet};
use crate::optim::{Objective, ObjectiveError};

pub const CONE_C_MIN: f64 = 0.3;
pub const CONE_C_MAX: f64 = 0.6;
/// ChaCha stream used for the construction, so a run may reuse its
/// optimiser seed here without sharing random numbers.
pub const CONE_STREAM: u64 = 1;
/// Seed draws are retried this many times until the construction check passes.
pub const CONE_MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCone {
    spec: LatentSpec,
    target: Vec<f64>,
    target_norm: f64,
    rng_seed: u64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl SyntheticCone {
    /// Hidden target in inner-latent coordinates.
    pub fn target_inner(&self) -> &[f64] {
        &self.target
    }

    /// Hidden target as a latent of the spec.
    pub fn target_latent(&self) -> Result<Vec<f64>, BridgeError> {
        Ok(self.spec.from_inner(&self.target)?)
    }

    pub fn spec(&self) -> &LatentSpec {
        &self.spec
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// `cos(T→(z), ε*)`
    pub fn score(&self, z: &[f64]) -> Result<f64, BridgeError> {
        let eps = self.spec.to_inner(z)?;
        let n = norm(&eps);
        if n == 0.0 {
            return Ok(0.0);
        }
        Ok((dot(&eps, &self.target) / (n * self.target_norm)).clamp(-1.0, 1.0))
    }
}

impl Objective for SyntheticCone {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError> {
        self.score(point).map_err(|e| ObjectiveError(e.to_string()))
    }
}

impl Generator for SyntheticCone {
    fn handle(&mut self, id: u64, kind: RequestKind, latent: &[f64]) -> Result<(Option<String>, Option<f64>), String> {
        let handle = format!("cone:{id}");
        let score = || self.score(latent).map_err(|e| e.to_string());
        Ok(match kind {
            RequestKind::Generate => (Some(handle), None),
            RequestKind::Score => (None, Some(score()?)),
            RequestKind::GenerateAndScore => (Some(handle), Some(score()?)),
        })
    }
}

fn best_span_score(seeds: &SeedSet, cone: &SyntheticCone) -> Result<f64, BridgeError> {
    let k = seeds.k();
    let projection = seeds.xi_pinv() * nalgebra::DVector::from_column_slice(&cone.target);
    let mut candidates = vec![vec![1.0 / (k as f64).sqrt(); k]];
    if projection.iter().any(|&v| v > 0.0) {
        candidates.push(WeightVector::from_clamped(projection.iter().copied().collect()).into_vec());
    }
    let mut best = f64::NEG_INFINITY;
    for w in candidates {
        let z = seeds.lol_combine(&WeightVector::new(w).expect("unit weights"))?;
        best = best.max(cone.score(&z)?);
    }
    Ok(best)
}

/// Hidden target and `k` seeds whose surrogate space provably beats every seed.
pub fn synthetic_cone(spec: &LatentSpec, k: usize, rng_seed: u64) -> Result<(SeedSet, SyntheticCone), BridgeError> {
    if k < 2 {
        return Err(BridgeError::InvalidConfig(format!("need at least two seeds, got {k}")));
    }
    let d = spec.total_dim();
    if k > d {
        return Err(BridgeError::InvalidConfig(format!("{k} seeds cannot be independent in dimension {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(CONE_STREAM);
    let mut target: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    if spec.has_sphere() {
        // Sphere blocks forget their length, so keep the target representable.
        target = spec.to_inner(&spec.from_inner(&target)?)?;
    }
    let target_norm = norm(&target);
    let cone = SyntheticCone { spec: spec.clone(), target, target_norm, rng_seed };
    let unit: Vec<f64> = cone.target.iter().map(|v| v / target_norm).collect();

    for _ in 0..CONE_MAX_ATTEMPTS {
        let mut inner = Vec::with_capacity(k);
        let mut seed_scores = Vec::with_capacity(k);
        for _ in 0..k {
            let c: f64 = rng.random_range(CONE_C_MIN..=CONE_C_MAX);
            let mut eta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let along = dot(&eta, &unit);
            eta.iter_mut().zip(&unit).for_each(|(e, u)| *e -= along * u);
            let scale = target_norm / norm(&eta);
            let s = (1.0 - c * c).sqrt();
            let eps: Vec<f64> = cone.target.iter().zip(&eta).map(|(t, e)| c * t + s * scale * e).collect();
            inner.push(eps);
            seed_scores.push(c);
        }
        let latents: Vec<Vec<f64>> = inner.iter().map(|e| spec.from_inner(e)).collect::<Result<_, _>>()?;
        let seeds = match SeedSet::from_latents(spec.clone(), &latents) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let max_seed = latents
            .iter()
            .map(|z| cone.score(z))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if best_span_score(&seeds, &cone)? > max_seed + 1e-9 {
            return Ok((seeds, cone));
        }
    }
    Err(BridgeError::InvalidConfig(format!(
        "no seed draw passed the construction check in {CONE_MAX_ATTEMPTS} attempts"
    )))
}
