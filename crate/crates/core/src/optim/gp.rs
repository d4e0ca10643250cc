//! Gaussian process regression with an isotropic Matérn-3/2 kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Added to the diagonal in turn until the Cholesky factorisation succeeds.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("kernel matrix not positive definite even with jitter 1e-4")]
    IllConditioned,
    #[error("no observations")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub lengthscales: Vec<f64>,
    pub signal_vars: Vec<f64>,
    pub noises: Vec<f64>,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl Default for HyperGrid {
    /// Lengthscale: 16 log-spaced values in `[0.01, 2]`; signal variance: 8
    /// log-spaced values in `[0.1, 10]` (targets are standardised); noise in
    /// `{1e-6, 1e-4, 1e-2}`.
    fn default() -> Self {
        HyperGrid {
            lengthscales: log_spaced(0.01, 2.0, 16),
            signal_vars: log_spaced(0.1, 10.0, 8),
            noises: vec![1e-6, 1e-4, 1e-2],
        }
    }
}

pub fn matern32(r: f64, lengthscale: f64, signal_var: f64) -> f64 {
    let a = 3f64.sqrt() * r / lengthscale;
    signal_var * (1.0 + a) * (-a).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn distances(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| dist(&x[i], &x[j]))
}

#[derive(Debug, Clone)]
pub struct Gp {
    x: Vec<Vec<f64>>,
    hyper: Hyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    jitter: f64,
}

fn standardise(y: &[f64]) -> (DVector<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    (DVector::from_iterator(y.len(), y.iter().map(|v| (v - mean) / scale)), mean, scale)
}

impl Gp {
    /// Fit with fixed hyperparameters on standardised targets.
    pub fn fit(x: &[Vec<f64>], y: &[f64], hyper: Hyper) -> Result<Gp, GpError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(GpError::Empty);
        }
        let (ys, y_mean, y_scale) = standardise(y);
        let base = distances(x).map(|r| matern32(r, hyper.lengthscale, hyper.signal_var));
        for &jitter in &JITTER_LADDER {
            let mut k = base.clone();
            for i in 0..k.nrows() {
                k[(i, i)] += hyper.noise + jitter;
            }
            if let Some(chol) = k.cholesky() {
                let alpha = chol.solve(&ys);
                if alpha.iter().all(|v| v.is_finite()) {
                    return Ok(Gp { x: x.to_vec(), hyper, chol, alpha, y_mean, y_scale, jitter });
                }
            }
        }
        Err(GpError::IllConditioned)
    }

    /// Pick hyperparameters maximising the marginal likelihood over `grid`, then fit.
    pub fn fit_grid(x: &[Vec<f64>], y: &[f64], grid: &HyperGrid) -> Result<Gp, GpError> {
        let hyper = Self::select(x, y, grid)?;
        Self::fit(x, y, hyper)
    }

    /// Grid search; one eigendecomposition per lengthscale covers every
    /// (signal variance, noise) pair. Ties keep the first grid entry.
    pub fn select(x: &[Vec<f64>], y: &[f64], grid: &HyperGrid) -> Result<Hyper, GpError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(GpError::Empty);
        }
        let (ys, _, _) = standardise(y);
        let d = distances(x);
        let mut best: Option<(f64, Hyper)> = None;
        for &lengthscale in &grid.lengthscales {
            let corr = d.map(|r| matern32(r, lengthscale, 1.0));
            let eig = corr.symmetric_eigen();
            let proj = eig.eigenvectors.transpose() * &ys;
            for &signal_var in &grid.signal_vars {
                for &noise in &grid.noises {
                    let mut ll = 0.0;
                    for (lam, q) in eig.eigenvalues.iter().zip(proj.iter()) {
                        let v = signal_var * lam.max(0.0) + noise;
                        ll -= 0.5 * (q * q / v + v.ln());
                    }
                    if ll.is_finite() && best.map_or(true, |(b, _)| ll > b) {
                        best = Some((ll, Hyper { lengthscale, signal_var, noise }));
                    }
                }
            }
        }
        best.map(|(_, h)| h).ok_or(GpError::IllConditioned)
    }

    pub fn hyper(&self) -> Hyper {
        self.hyper
    }

    /// Diagonal jitter that made the factorisation succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior mean and variance of the latent function, in target units.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        let h = self.hyper;
        let ks = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| matern32(dist(xi, point), h.lengthscale, h.signal_var)),
        );
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("cholesky factor is invertible");
        let var = (h.signal_var - v.norm_squared()).max(0.0);
        (self.y_mean + self.y_scale * mean, var * self.y_scale * self.y_scale)
    }
}
