//! Weight dot product versus inner-latent cosine similarity.
//!
//! For Gaussian seeds `ξ` (D×K) and weights `w_a`, `w_b` on the orthant,
//! `cos(ξ w_a, ξ w_b) → w_a · w_b` as `D` grows. The experiment measures how
//! closely the two agree at finite `D` via their Pearson correlation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charts::{ChartError, ChartKind, UPoint};
use crate::stats::{pearson, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("all w_dot values (or all cosines) are equal")]
    DegenerateVariance,
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub n_seed_realisations: usize,
    pub n_u: usize,
    pub rng_seed: u64,
    /// Chart that pushes uniform `u` to weights.
    #[serde(default = "default_chart")]
    pub chart: ChartKind,
}

fn default_chart() -> ChartKind {
    ChartKind::KnotheRosenblatt
}

impl DominanceConfig {
    pub fn new(k: usize, d: usize, rng_seed: u64) -> Self {
        DominanceConfig { k, d, n_seed_realisations: 100, n_u: 100, rng_seed, chart: ChartKind::KnotheRosenblatt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub n_seed_realisations: usize,
    pub n_u: usize,
    pub rng_seed: u64,
    pub chart: ChartKind,
    pub n_pairs: usize,
    pub pearson_r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scatter: Option<Vec<(f64, f64)>>,
}

impl CorrelationReport {
    /// `w_dot,cos_sim` rows.
    pub fn scatter_csv(&self) -> Option<String> {
        self.scatter.as_ref().map(|pairs| {
            let mut out = String::from("w_dot,cos_sim\n");
            for (a, b) in pairs {
                out.push_str(&format!("{a:?},{b:?}\n"));
            }
            out
        })
    }
}

fn quad(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&(g * b))
}

/// Pairs `(w_a·w_b, cos(ξw_a, ξw_b))` for one seed realisation. Realisation
/// `r` draws from ChaCha stream `r` of the run seed, so results do not depend
/// on scheduling.
fn realisation(cfg: &DominanceConfig, r: usize) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(r as u64);
    let xi = DMatrix::<f64>::from_fn(cfg.d, cfg.k, |_, _| rng.sample(StandardNormal));
    let gram = xi.transpose() * &xi;
    let draw_w = |rng: &mut ChaCha8Rng| -> Result<DVector<f64>, DiagnosticsError> {
        let u: Vec<f64> = (0..cfg.k - 1).map(|_| rng.random::<f64>()).collect();
        let w = cfg.chart.forward(&UPoint::new(u)?)?;
        Ok(DVector::from_column_slice(w.as_slice()))
    };
    (0..cfg.n_u)
        .map(|_| {
            let a = draw_w(&mut rng)?;
            let b = draw_w(&mut rng)?;
            let dot = a.dot(&b);
            let denom = (quad(&gram, &a, &a) * quad(&gram, &b, &b)).sqrt();
            let cos = if denom > 0.0 { (quad(&gram, &a, &b) / denom).clamp(-1.0, 1.0) } else { 0.0 };
            Ok((dot, cos))
        })
        .collect()
}

pub fn dominance_experiment(cfg: &DominanceConfig, keep_scatter: bool) -> Result<CorrelationReport, DiagnosticsError> {
    if cfg.k < 2 || cfg.d < 1 {
        return Err(DiagnosticsError::InvalidConfig(format!("need K ≥ 2 and D ≥ 1, got K={} D={}", cfg.k, cfg.d)));
    }
    if cfg.n_seed_realisations == 0 || cfg.n_u == 0 {
        return Err(DiagnosticsError::InvalidConfig("sample counts must be positive".into()));
    }
    let per: Vec<Vec<(f64, f64)>> = (0..cfg.n_seed_realisations)
        .into_par_iter()
        .map(|r| realisation(cfg, r))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(f64, f64)> = per.into_iter().flatten().collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let pearson_r = match pearson(&x, &y) {
        Ok(r) => r,
        Err(StatsError::DegenerateVariance | StatsError::TooFewSamples { .. }) => {
            return Err(DiagnosticsError::DegenerateVariance)
        }
        Err(e) => return Err(DiagnosticsError::InvalidConfig(e.to_string())),
    };
    Ok(CorrelationReport {
        k: cfg.k,
        d: cfg.d,
        n_seed_realisations: cfg.n_seed_realisations,
        n_u: cfg.n_u,
        rng_seed: cfg.rng_seed,
        chart: cfg.chart,
        n_pairs: pairs.len(),
        pearson_r,
        scatter: keep_scatter.then_some(pairs),
    })
}
