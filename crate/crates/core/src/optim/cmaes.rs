//! (μ/μ_w, λ)-CMA-ES on the unit box, maximising.
//!
//! Strategy parameters follow Hansen's tutorial defaults. Candidates leaving
//! `[0,1]^n` are redrawn up to [`BOX_RESAMPLE_LIMIT`] times and then clamped
//! coordinatewise; the clamped point is what gets evaluated and fed back.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_budget, Objective, OptimError, RunRecord};

pub const BOX_RESAMPLE_LIMIT: usize = 100;

const SIGMA_MIN: f64 = 1e-12;
const SIGMA_MAX: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaesParams {
    pub population: usize,
    pub sigma0: f64,
}

impl Default for CmaesParams {
    fn default() -> Self {
        CmaesParams { population: 4, sigma0: 0.2 }
    }
}

#[derive(Debug, Clone)]
pub struct Cmaes {
    n: usize,
    lambda: usize,
    weights: Vec<f64>,
    mueff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    inv_sqrt_cov: DMatrix<f64>,
    pc: DVector<f64>,
    ps: DVector<f64>,
    count_eval: usize,
    eigen_eval: usize,
    rng: ChaCha8Rng,
}

impl Cmaes {
    pub fn new(n: usize, params: CmaesParams, rng_seed: u64) -> Result<Self, OptimError> {
        if n == 0 {
            return Err(OptimError::InvalidConfig("dimension must be at least 1".into()));
        }
        if params.population < 2 {
            return Err(OptimError::InvalidConfig("population must be at least 2".into()));
        }
        if !(params.sigma0 > 0.0 && params.sigma0.is_finite()) {
            return Err(OptimError::InvalidConfig(format!("sigma0 must be positive, got {}", params.sigma0)));
        }
        let nf = n as f64;
        let lambda = params.population;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let cs = (mueff + 2.0) / (nf + mueff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        Ok(Cmaes {
            n,
            lambda,
            weights,
            mueff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            mean: DVector::from_element(n, 0.5),
            sigma: params.sigma0,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            inv_sqrt_cov: DMatrix::identity(n, n),
            pc: DVector::zeros(n),
            ps: DVector::zeros(n),
            count_eval: 0,
            eigen_eval: 0,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        })
    }

    pub fn population(&self) -> usize {
        self.lambda
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Smallest eigenvalue of the current covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        self.cov.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn draw(&mut self) -> DVector<f64> {
        let z = DVector::from_fn(self.n, |_, _| StandardNormal.sample(&mut self.rng));
        let y = &self.basis * z.component_mul(&self.scales);
        &self.mean + y * self.sigma
    }

    /// One generation of candidates, all inside `[0,1]^n`.
    pub fn ask(&mut self) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let mut x = self.draw();
                let mut tries = 1;
                while tries < BOX_RESAMPLE_LIMIT && x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    x = self.draw();
                    tries += 1;
                }
                x.iter().map(|v| if v.is_nan() { 0.5 } else { v.clamp(0.0, 1.0) }).collect()
            })
            .collect()
    }

    /// Update from a full generation. `NaN` fitness ranks last; ties keep candidate order.
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) {
        assert_eq!(candidates.len(), self.lambda);
        assert_eq!(fitness.len(), self.lambda);
        let n = self.n as f64;
        self.count_eval += self.lambda;

        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| {
            let (fa, fb) = (fitness[a], fitness[b]);
            match (fa.is_nan(), fb.is_nan()) {
                (true, true) => std::cmp::Ordering::Equal,
                (true, false) => std::cmp::Ordering::Greater,
                (false, true) => std::cmp::Ordering::Less,
                _ => fb.partial_cmp(&fa).expect("non-NaN"),
            }
        });

        let xs: Vec<DVector<f64>> = candidates.iter().map(|c| DVector::from_column_slice(c)).collect();
        let old_mean = self.mean.clone();
        let mut new_mean = DVector::zeros(self.n);
        for (w, &i) in self.weights.iter().zip(&order) {
            new_mean.axpy(*w, &xs[i], 1.0);
        }
        self.mean = new_mean;
        let shift = (&self.mean - &old_mean) / self.sigma;

        self.ps = &self.ps * (1.0 - self.cs)
            + (&self.inv_sqrt_cov * &shift) * (self.cs * (2.0 - self.cs) * self.mueff).sqrt();
        let gen = self.count_eval as f64 / self.lambda as f64;
        let ps_norm = self.ps.norm();
        let hsig = ps_norm / (1.0 - (1.0 - self.cs).powf(2.0 * gen)).sqrt() / self.chi_n < 1.4 + 2.0 / (n + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };
        self.pc = &self.pc * (1.0 - self.cc) + &shift * (hsig_f * (self.cc * (2.0 - self.cc) * self.mueff).sqrt());

        let mut rank_mu = DMatrix::zeros(self.n, self.n);
        for (w, &i) in self.weights.iter().zip(&order) {
            let d = (&xs[i] - &old_mean) / self.sigma;
            rank_mu.ger(*w, &d, &d, 1.0);
        }
        let rank_one = &self.pc * self.pc.transpose();
        self.cov = &self.cov * (1.0 - self.c1 - self.cmu)
            + (rank_one + &self.cov * ((1.0 - hsig_f) * self.cc * (2.0 - self.cc))) * self.c1
            + rank_mu * self.cmu;

        self.sigma *= ((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();
        self.sigma = self.sigma.clamp(SIGMA_MIN, SIGMA_MAX);

        if (self.count_eval - self.eigen_eval) as f64 > self.lambda as f64 / (self.c1 + self.cmu) / n / 10.0 {
            self.update_eigen();
        }
    }

    fn update_eigen(&mut self) {
        self.eigen_eval = self.count_eval;
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let floor = (max_ev * 1e-20).max(f64::MIN_POSITIVE);
        if !eig.eigenvalues.iter().all(|v| v.is_finite()) || max_ev <= 0.0 {
            // Numerical breakdown: restart the shape, keep the mean.
            self.cov = DMatrix::identity(self.n, self.n);
            self.basis = DMatrix::identity(self.n, self.n);
            self.scales = DVector::from_element(self.n, 1.0);
            self.inv_sqrt_cov = DMatrix::identity(self.n, self.n);
            self.pc.fill(0.0);
            self.ps.fill(0.0);
            return;
        }
        let evals = eig.eigenvalues.map(|v| v.max(floor));
        self.scales = evals.map(f64::sqrt);
        self.basis = eig.eigenvectors;
        let inv = DMatrix::from_diagonal(&self.scales.map(|s| 1.0 / s));
        self.inv_sqrt_cov = &self.basis * inv * self.basis.transpose();
        self.cov = &self.basis * DMatrix::from_diagonal(&evals) * self.basis.transpose();
    }
}

/// CMA-ES on `[0,1]^dim`, mean started at the centre. A trailing partial
/// generation is evaluated but not used for an update.
pub fn cmaes_u<O: Objective + ?Sized>(
    objective: &mut O,
    dim: usize,
    budget: usize,
    rng_seed: u64,
    params: CmaesParams,
) -> Result<RunRecord, OptimError> {
    check_budget(budget)?;
    let mut es = Cmaes::new(dim, params, rng_seed)?;
    let mut record = RunRecord::new(rng_seed);
    while record.len() < budget {
        let candidates = es.ask();
        let remaining = budget - record.len();
        let fitness: Vec<f64> = candidates
            .iter()
            .take(remaining)
            .map(|c| record.evaluate(objective, c.clone()))
            .collect();
        if fitness.len() == candidates.len() {
            es.tell(&candidates, &fitness);
        }
    }
    Ok(record)
}
