use serde::{Deserialize, Serialize};

use super::LatentError;
use crate::special::{norm_cdf, norm_ppf};

const SOLVE_MAX_ITER: usize = 200;

/// Per-coordinate scalar distribution, transported to N(0, 1) through its CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarCdf {
    Normal { mean: f64, std: f64 },
    Logistic { loc: f64, scale: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    /// Piecewise-linear CDF through `(x[i], p[i])`; `p` runs from 0 to 1.
    Table { x: Vec<f64>, p: Vec<f64> },
}

impl ScalarCdf {
    pub(crate) fn validate(&self) -> Result<(), LatentError> {
        let bad = |msg: &str| Err(LatentError::InvalidSpec(msg.to_string()));
        match self {
            ScalarCdf::Normal { mean, std } => {
                if !mean.is_finite() || !(*std > 0.0 && std.is_finite()) {
                    return bad("normal cdf needs finite mean and positive std");
                }
            }
            ScalarCdf::Logistic { loc, scale } => {
                if !loc.is_finite() || !(*scale > 0.0 && scale.is_finite()) {
                    return bad("logistic cdf needs finite loc and positive scale");
                }
            }
            ScalarCdf::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return bad("uniform cdf needs low < high");
                }
            }
            ScalarCdf::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return bad("exponential cdf needs a positive rate");
                }
            }
            ScalarCdf::Table { x, p } => {
                if x.len() < 2 || x.len() != p.len() {
                    return bad("table cdf needs at least two (x, p) knots of equal length");
                }
                if p[0] != 0.0 || p[p.len() - 1] != 1.0 {
                    return bad("table cdf must start at p=0 and end at p=1");
                }
                let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1] && w[1].is_finite());
                if !increasing(x) || !increasing(p) || !x[0].is_finite() {
                    return bad("table cdf knots must be finite and strictly increasing");
                }
            }
        }
        Ok(())
    }

    /// Open support interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ScalarCdf::Normal { .. } | ScalarCdf::Logistic { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            ScalarCdf::Uniform { low, high } => (*low, *high),
            ScalarCdf::Exponential { .. } => (0.0, f64::INFINITY),
            ScalarCdf::Table { x, .. } => (x[0], x[x.len() - 1]),
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            ScalarCdf::Normal { mean, std } => norm_cdf((v - mean) / std),
            ScalarCdf::Logistic { loc, scale } => 1.0 / (1.0 + (-(v - loc) / scale).exp()),
            ScalarCdf::Uniform { low, high } => ((v - low) / (high - low)).clamp(0.0, 1.0),
            ScalarCdf::Exponential { rate } => {
                if v <= 0.0 {
                    0.0
                } else {
                    -(-rate * v).exp_m1()
                }
            }
            ScalarCdf::Table { x, p } => table_eval(x, p, v),
        }
    }

    /// Survival function `1 - cdf`, evaluated without cancellation where possible.
    pub fn sf(&self, v: f64) -> f64 {
        match self {
            ScalarCdf::Normal { mean, std } => norm_cdf(-(v - mean) / std),
            ScalarCdf::Logistic { loc, scale } => 1.0 / (1.0 + ((v - loc) / scale).exp()),
            ScalarCdf::Uniform { low, high } => ((high - v) / (high - low)).clamp(0.0, 1.0),
            ScalarCdf::Exponential { rate } => {
                if v <= 0.0 {
                    1.0
                } else {
                    (-rate * v).exp()
                }
            }
            ScalarCdf::Table { x, p } => {
                let q: Vec<f64> = p.iter().map(|pi| 1.0 - pi).collect();
                table_eval(x, &q, v)
            }
        }
    }

    pub fn pdf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v <= lo || v >= hi {
            return 0.0;
        }
        match self {
            ScalarCdf::Normal { mean, std } => {
                let t = (v - mean) / std;
                (-0.5 * t * t).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            ScalarCdf::Logistic { loc, scale } => {
                let e = (-(v - loc).abs() / scale).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            ScalarCdf::Uniform { low, high } => 1.0 / (high - low),
            ScalarCdf::Exponential { rate } => rate * (-rate * v).exp(),
            ScalarCdf::Table { x, p } => {
                let i = x.partition_point(|&xi| xi <= v).clamp(1, x.len() - 1);
                (p[i] - p[i - 1]) / (x[i] - x[i - 1])
            }
        }
    }

    /// `Φ⁻¹(cdf(v))`, taken from the upper tail when `cdf(v) > ½`.
    pub fn to_normal(&self, v: f64) -> Option<f64> {
        let (lo, hi) = self.support();
        if !(v > lo && v < hi) {
            return None;
        }
        let p = self.cdf(v);
        let eps = if p <= 0.5 {
            norm_ppf(p)
        } else {
            -norm_ppf(self.sf(v))
        };
        eps.is_finite().then_some(eps)
    }

    /// `cdf⁻¹(Φ(eps))` by bracketing plus safeguarded Newton.
    pub fn from_normal(&self, eps: f64) -> Option<f64> {
        if !eps.is_finite() {
            return None;
        }
        // Solve in whichever tail the target probability is accurate.
        let lower = eps <= 0.0;
        let target = if lower { norm_cdf(eps) } else { norm_cdf(-eps) };
        if target <= 0.0 {
            return None;
        }
        let residual = |v: f64| {
            if lower {
                self.cdf(v) - target
            } else {
                target - self.sf(v)
            }
        };
        let (mut lo, mut hi) = self.bracket(&residual)?;
        let mut v = if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            return None;
        };
        for _ in 0..SOLVE_MAX_ITER {
            let r = residual(v);
            if r == 0.0 || r.abs() <= 1e-15 * target {
                return Some(v);
            }
            if r < 0.0 {
                lo = v;
            } else {
                hi = v;
            }
            let slope = self.pdf(v);
            let newton = if slope > 0.0 { v - r / slope } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let step = (next - v).abs();
            v = next;
            if step <= 4.0 * f64::EPSILON * v.abs() || hi - lo <= 4.0 * f64::EPSILON * v.abs().max(f64::MIN_POSITIVE) {
                return Some(v);
            }
        }
        None
    }

    /// Finite interval `[lo, hi]` with `residual(lo) <= 0 <= residual(hi)`.
    fn bracket(&self, residual: &dyn Fn(f64) -> f64) -> Option<(f64, f64)> {
        let (s_lo, s_hi) = self.support();
        let centre = match self {
            ScalarCdf::Normal { mean, .. } => *mean,
            ScalarCdf::Logistic { loc, .. } => *loc,
            ScalarCdf::Exponential { rate } => 1.0 / rate,
            _ => 0.5 * (s_lo + s_hi),
        };
        let width = match self {
            ScalarCdf::Normal { std, .. } => *std,
            ScalarCdf::Logistic { scale, .. } => *scale,
            ScalarCdf::Exponential { rate } => 1.0 / rate,
            _ => s_hi - s_lo,
        };
        let mut lo = if s_lo.is_finite() { s_lo } else { centre - width };
        let mut hi = if s_hi.is_finite() { s_hi } else { centre + width };
        let mut step = width;
        while residual(lo) > 0.0 {
            if s_lo.is_finite() {
                return None;
            }
            step *= 2.0;
            lo = centre - step;
            if !lo.is_finite() {
                return None;
            }
        }
        step = width;
        while residual(hi) < 0.0 {
            if s_hi.is_finite() {
                return None;
            }
            step *= 2.0;
            hi = centre + step;
            if !hi.is_finite() {
                return None;
            }
        }
        Some((lo, hi))
    }
}

fn table_eval(x: &[f64], p: &[f64], v: f64) -> f64 {
    if v <= x[0] {
        return p[0];
    }
    if v >= x[x.len() - 1] {
        return p[p.len() - 1];
    }
    let i = x.partition_point(|&xi| xi <= v);
    let t = (v - x[i - 1]) / (x[i] - x[i - 1]);
    p[i - 1] + t * (p[i] - p[i - 1])
}
