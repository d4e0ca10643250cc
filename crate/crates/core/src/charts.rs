//! Weight charts: bijections between the unit box `[0,1]^{K−1}` and the
//! positive orthant of the unit sphere in `R^K`.
//!
//! * [`ChartKind::Angular`] uses hyperspherical angles `θ_i = (π/2) u_i`.
//!   Smooth but not equal-area.
//! * [`ChartKind::KnotheRosenblatt`] uses Dirichlet(½,…,½) stick-breaking with
//!   `v_k = I⁻¹_{u_k}(½, (K−k)/2)` and `w_i = √z_i`. It pushes the uniform law
//!   on the box to the uniform surface measure on the orthant.
//!
//! Inverses at boundary points where later coordinates are unidentifiable
//! return `0` for those coordinates and report the first such axis in
//! [`Inverted::degenerate_from`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{betainc, betaincinv, SpecialError};

pub const WEIGHT_NORM_TOL: f64 = 1e-9;
pub const WEIGHT_NEG_TOL: f64 = 1e-12;
/// Angular fibers collapse once `∏ sin θ_i` falls below this.
pub const ANGULAR_FIBER_TOL: f64 = 1e-12;
/// KR fibers collapse once the remaining stick `s_k` falls below this.
pub const KR_FIBER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("point outside the unit box at axis {axis}: {value}")]
    OutOfDomain { axis: usize, value: f64 },
    #[error("weight vector norm {norm} is not 1")]
    NotUnitNorm { norm: f64 },
    #[error("weight {index} is negative: {value}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unidentifiable coordinates from axis {axis} on")]
    DegenerateFiber { axis: usize },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Point on the positive orthant of the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates unit norm (1e-9) and nonnegativity; entries in `[−1e-12, 0)` are clamped to 0.
    pub fn new(mut w: Vec<f64>) -> Result<Self, ChartError> {
        for (index, v) in w.iter_mut().enumerate() {
            if !v.is_finite() || *v < -WEIGHT_NEG_TOL {
                return Err(ChartError::NegativeWeight { index, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let norm = norm2(&w);
        if w.is_empty() || (norm - 1.0).abs() > WEIGHT_NORM_TOL {
            return Err(ChartError::NotUnitNorm { norm });
        }
        Ok(WeightVector(w))
    }

    /// Clamp negatives to zero and rescale to unit norm.
    ///
    /// Panics if nothing positive remains.
    pub fn from_clamped(mut w: Vec<f64>) -> Self {
        for v in w.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let norm = norm2(&w);
        assert!(norm > 0.0 && norm.is_finite(), "weight vector has no positive mass");
        w.iter_mut().for_each(|v| *v /= norm);
        WeightVector(w)
    }

    /// Standard basis vector `e_k` in `R^len`.
    pub fn basis(len: usize, k: usize) -> Self {
        let mut w = vec![0.0; len];
        w[k] = 1.0;
        WeightVector(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &WeightVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = ChartError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Point of the surrogate space `[0,1]^{K−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UPoint(Vec<f64>);

impl UPoint {
    pub fn new(u: Vec<f64>) -> Result<Self, ChartError> {
        if let Some((axis, &value)) = u.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ChartError::OutOfDomain { axis, value });
        }
        Ok(UPoint(u))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for UPoint {
    type Error = ChartError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        UPoint::new(v)
    }
}

impl From<UPoint> for Vec<f64> {
    fn from(u: UPoint) -> Self {
        u.0
    }
}

/// Result of a chart inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Inverted {
    pub u: UPoint,
    /// First axis whose value could not be identified (set to 0), if any.
    pub degenerate_from: Option<usize>,
}

impl Inverted {
    /// Reject degenerate fibers.
    pub fn strict(self) -> Result<UPoint, ChartError> {
        match self.degenerate_from {
            Some(axis) => Err(ChartError::DegenerateFiber { axis }),
            None => Ok(self.u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChartKind {
    #[serde(rename = "angular")]
    Angular,
    #[serde(rename = "kr")]
    KnotheRosenblatt,
}

impl ChartKind {
    pub fn forward(self, u: &UPoint) -> Result<WeightVector, ChartError> {
        match self {
            ChartKind::Angular => Ok(angular_forward(u)),
            ChartKind::KnotheRosenblatt => kr_forward(u),
        }
    }

    pub fn inverse(self, w: &WeightVector) -> Result<Inverted, ChartError> {
        match self {
            ChartKind::Angular => Ok(angular_inverse(w)),
            ChartKind::KnotheRosenblatt => kr_inverse(w),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChartKind::Angular => "angular",
            ChartKind::KnotheRosenblatt => "kr",
        }
    }
}

impl fmt::Display for ChartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChartKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "angular" => Ok(ChartKind::Angular),
            "kr" => Ok(ChartKind::KnotheRosenblatt),
            other => Err(format!("unknown chart {other:?}; expected \"angular\" or \"kr\"")),
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Suffix norms `t_k = ‖w_{k..}‖`.
fn tail_norms(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0; w.len()];
    for k in (0..w.len()).rev() {
        acc += w[k] * w[k];
        out[k] = acc.sqrt();
    }
    out
}

pub fn angular_forward(u: &UPoint) -> WeightVector {
    let n = u.len();
    let mut w = Vec::with_capacity(n + 1);
    let mut sin_prod = 1.0;
    for &ui in u.as_slice() {
        // cos θ as sin(π/2 − θ) so both box edges give exact 0 and 1.
        w.push(sin_prod * (FRAC_PI_2 * (1.0 - ui)).sin());
        sin_prod *= (FRAC_PI_2 * ui).sin();
    }
    w.push(sin_prod);
    WeightVector::from_clamped(w)
}

/// Angles recovered as `θ_k = atan2(‖w_{k+1..}‖, w_k)`, which equals
/// `arccos(w_k / ∏_{i<k} sin θ_i)` but stays accurate near `θ = 0`.
pub fn angular_inverse(w: &WeightVector) -> Inverted {
    let w = w.as_slice();
    let n = w.len().saturating_sub(1);
    let tails = tail_norms(w);
    let mut u = vec![0.0; n];
    let mut degenerate_from = None;
    for k in 0..n {
        // tails[k] = ∏_{i<k} sin θ_i
        if tails[k] < ANGULAR_FIBER_TOL {
            degenerate_from = Some(k);
            break;
        }
        let theta = tails[k + 1].atan2(w[k]);
        u[k] = (theta / FRAC_PI_2).clamp(0.0, 1.0);
    }
    Inverted { u: UPoint(u), degenerate_from }
}

pub fn kr_forward(u: &UPoint) -> Result<WeightVector, ChartError> {
    let n = u.len();
    let k_total = n + 1;
    let mut z = Vec::with_capacity(k_total);
    let mut remaining = 1.0;
    for (i, &ui) in u.as_slice().iter().enumerate() {
        let b = (k_total - 1 - i) as f64 / 2.0;
        let v = betaincinv(0.5, b, ui)?;
        z.push(v * remaining);
        remaining *= 1.0 - v;
    }
    z.push(remaining);
    Ok(WeightVector::from_clamped(z.into_iter().map(f64::sqrt).collect()))
}

pub fn kr_inverse(w: &WeightVector) -> Result<Inverted, ChartError> {
    let z: Vec<f64> = w.as_slice().iter().map(|v| v * v).collect();
    let k_total = z.len();
    let n = k_total.saturating_sub(1);
    let mut suffix = vec![0.0; k_total + 1];
    for k in (0..k_total).rev() {
        suffix[k] = suffix[k + 1] + z[k];
    }
    let mut u = vec![0.0; n];
    let mut degenerate_from = None;
    for k in 0..n {
        if suffix[k] < KR_FIBER_TOL {
            degenerate_from = Some(k);
            break;
        }
        let v = (z[k] / suffix[k]).clamp(0.0, 1.0);
        let b = (k_total - 1 - k) as f64 / 2.0;
        u[k] = betainc(0.5, b, v)?;
    }
    Ok(Inverted { u: UPoint(u), degenerate_from })
}
