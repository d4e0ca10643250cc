//! Bayesian optimisation on the unit box: Matérn-3/2 GP, grid-selected
//! hyperparameters and expected improvement over shifted Halton candidates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gp::{Gp, HyperGrid};
use super::{check_budget, Objective, OptimError, RunRecord};
use crate::special::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, PartialEq)]
pub struct BoParams {
    pub init_points: usize,
    pub candidates: usize,
    pub grid: HyperGrid,
    /// Hyperparameters are reselected at every step until this many
    /// observations exist, and on every `refit_every`-th step afterwards.
    pub refit_until: usize,
    pub refit_every: usize,
}

impl Default for BoParams {
    fn default() -> Self {
        BoParams { init_points: 5, candidates: 1024, grid: HyperGrid::default(), refit_until: 50, refit_every: 10 }
    }
}

/// Expected improvement over `best` for a maximisation problem.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gap = mean - best;
    if !(sd > 0.0) {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * norm_cdf(z) + sd * norm_pdf(z)).max(0.0)
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// First `count` points of the `dim`-dimensional Halton sequence (index 1 onwards).
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let bases = primes(dim);
    (1..=count as u64).map(|i| bases.iter().map(|&b| radical_inverse(i, b)).collect()).collect()
}

pub fn bo_u<O: Objective + ?Sized>(
    objective: &mut O,
    dim: usize,
    budget: usize,
    rng_seed: u64,
    params: &BoParams,
) -> Result<RunRecord, OptimError> {
    check_budget(budget)?;
    if dim == 0 {
        return Err(OptimError::InvalidConfig("dimension must be at least 1".into()));
    }
    if params.init_points == 0 || budget <= params.init_points {
        return Err(OptimError::InvalidConfig(format!(
            "budget {budget} must exceed the {} initial points",
            params.init_points
        )));
    }
    if params.candidates == 0 || params.refit_every == 0 {
        return Err(OptimError::InvalidConfig("candidate count and refit interval must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut record = RunRecord::new(rng_seed);
    let random_point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.random::<f64>()).collect() };

    for _ in 0..params.init_points {
        let u = random_point(&mut rng);
        record.evaluate(objective, u);
    }

    let base = halton(params.candidates, dim);
    let mut hyper = None;
    let mut since_refit = 0;
    while record.len() < budget {
        let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = record
            .steps
            .iter()
            .filter(|s| !s.score.is_nan())
            .map(|s| (s.point.clone(), s.score))
            .unzip();
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        if xs.is_empty() {
            let u = random_point(&mut rng);
            record.evaluate(objective, u);
            continue;
        }
        since_refit += 1;
        if hyper.is_none() || xs.len() < params.refit_until || since_refit >= params.refit_every {
            hyper = Gp::select(&xs, &ys, &params.grid).ok();
            since_refit = 0;
        }
        let gp = hyper.and_then(|h| Gp::fit(&xs, &ys, h).ok());
        let next = match gp {
            Some(gp) => {
                let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut chosen = None;
                let mut chosen_ei = f64::NEG_INFINITY;
                for c in &base {
                    let u: Vec<f64> = c.iter().zip(&shift).map(|(a, s)| (a + s).fract()).collect();
                    let (m, v) = gp.predict(&u);
                    let ei = expected_improvement(m, v.sqrt(), best);
                    if ei > chosen_ei {
                        chosen_ei = ei;
                        chosen = Some(u);
                    }
                }
                chosen.expect("at least one candidate")
            }
            // The kernel matrix stayed singular: spend this step on a random point.
            None => random_point(&mut rng),
        };
        record.evaluate(objective, next);
    }
    Ok(record)
}
