//! Pearson correlation and Kolmogorov–Smirnov tests.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample has zero variance")]
    DegenerateVariance,
    #[error("samples have different lengths: {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("sample contains NaN")]
    NaN,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx.is_nan() || syy.is_nan() {
        return Err(StatsError::NaN);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl KsResult {
    /// True when the null hypothesis survives at level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{j−1} exp(−2 j² λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        // 1 − Q(0.2) is below 1e-12 and the series converges slowly here.
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NaN);
    }
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(s)
}

/// Asymptotic p-value with Stephens' finite-sample correction.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let s = sorted(sample)?;
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n) })
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: a.len().min(b.len()) });
    }
    let (sa, sb) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, na * nb / (na + nb)) })
}
