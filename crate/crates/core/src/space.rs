//! The surrogate chart `φ = l ∘ φ_w` from `[0,1]^{K−1}` into latent space,
//! its inverse, grids and similarity.

use rayon::prelude::*;
use thiserror::Error;

use crate::charts::{ChartError, ChartKind, Inverted, UPoint, WeightVector};
use crate::latent::{LatentError, SeedSet};
use crate::optim::{Objective, ObjectiveError};

/// Grids larger than this are refused.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("a surrogate space needs at least two seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("point has {got} coordinates, space has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid of {points} points exceeds the limit of {MAX_GRID_POINTS}")]
    TooLarge { points: u128 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSpace {
    seeds: SeedSet,
    chart: ChartKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub u: UPoint,
    pub latent: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    /// `φ_w(u_i) · φ_w(u_j)`
    pub approx: f64,
    /// Cosine between the inner latents `ξ φ_w(u_i)` and `ξ φ_w(u_j)`.
    pub exact: f64,
}

impl SurrogateSpace {
    pub fn new(seeds: SeedSet, chart: ChartKind) -> Result<Self, SpaceError> {
        if seeds.k() < 2 {
            return Err(SpaceError::TooFewSeeds(seeds.k()));
        }
        Ok(SurrogateSpace { seeds, chart })
    }

    pub fn seeds(&self) -> &SeedSet {
        &self.seeds
    }

    pub fn chart(&self) -> ChartKind {
        self.chart
    }

    /// `K − 1`
    pub fn dim(&self) -> usize {
        self.seeds.k() - 1
    }

    fn check_dim(&self, len: usize) -> Result<(), SpaceError> {
        if len != self.dim() {
            return Err(SpaceError::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    pub fn weights(&self, u: &UPoint) -> Result<WeightVector, SpaceError> {
        self.check_dim(u.len())?;
        Ok(self.chart.forward(u)?)
    }

    pub fn u_to_latent(&self, u: &UPoint) -> Result<Vec<f64>, SpaceError> {
        let w = self.weights(u)?;
        Ok(self.seeds.lol_combine(&w)?)
    }

    /// Convenience wrapper validating a raw slice first.
    pub fn u_slice_to_latent(&self, u: &[f64]) -> Result<Vec<f64>, SpaceError> {
        self.u_to_latent(&UPoint::new(u.to_vec())?)
    }

    /// Inverse chart. Degenerate fibers are reported in the result, not as errors.
    pub fn latent_to_u(&self, z: &[f64]) -> Result<Inverted, SpaceError> {
        let w = self.seeds.lol_invert(z)?;
        Ok(self.chart.inverse(&w)?)
    }

    /// Chart preimage of `e_k`, the corner holding seed `k` (0-based).
    pub fn corner(&self, k: usize) -> Result<UPoint, SpaceError> {
        if k >= self.seeds.k() {
            return Err(LatentError::IndexOutOfRange { index: k, len: self.seeds.k() }.into());
        }
        let w = WeightVector::basis(self.seeds.k(), k);
        Ok(self.chart.inverse(&w)?.u)
    }

    /// Grid coordinates only. `resolution` holds one entry per free axis, or a
    /// single entry used for all of them; `fixed` pins `(axis, value)` pairs.
    /// The last free axis varies fastest; endpoints 0 and 1 are included.
    pub fn grid_points(&self, resolution: &[usize], fixed: &[(usize, f64)]) -> Result<Vec<UPoint>, SpaceError> {
        let dim = self.dim();
        let mut pinned: Vec<Option<f64>> = vec![None; dim];
        for &(axis, value) in fixed {
            if axis >= dim {
                return Err(SpaceError::InvalidGrid(format!("axis {axis} out of range for dimension {dim}")));
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(SpaceError::InvalidGrid(format!("slice value {value} for axis {axis} outside [0, 1]")));
            }
            if pinned[axis].replace(value).is_some() {
                return Err(SpaceError::InvalidGrid(format!("axis {axis} fixed twice")));
            }
        }
        let free: Vec<usize> = (0..dim).filter(|&a| pinned[a].is_none()).collect();
        let res: Vec<usize> = match resolution.len() {
            1 => vec![resolution[0]; free.len()],
            n if n == free.len() => resolution.to_vec(),
            n => {
                return Err(SpaceError::InvalidGrid(format!(
                    "{n} resolutions given for {} free axes",
                    free.len()
                )))
            }
        };
        if let Some(&r) = res.iter().find(|&&r| r < 2) {
            return Err(SpaceError::InvalidGrid(format!("resolution {r} is below 2")));
        }
        let points = res.iter().try_fold(1u128, |acc, &r| acc.checked_mul(r as u128)).unwrap_or(u128::MAX);
        if points > MAX_GRID_POINTS as u128 {
            return Err(SpaceError::TooLarge { points });
        }
        let points = points as usize;
        let base: Vec<f64> = pinned.iter().map(|p| p.unwrap_or(0.0)).collect();
        let out = (0..points)
            .map(|mut idx| {
                let mut u = base.clone();
                for (slot, &axis) in free.iter().enumerate().rev() {
                    let r = res[slot];
                    let i = idx % r;
                    idx /= r;
                    u[axis] = i as f64 / (r - 1) as f64;
                }
                UPoint::new(u).expect("grid coordinates lie in [0, 1]")
            })
            .collect();
        Ok(out)
    }

    /// Grid coordinates paired with their latents, computed in parallel in a
    /// deterministic order.
    pub fn grid(&self, resolution: &[usize], fixed: &[(usize, f64)]) -> Result<Vec<GridPoint>, SpaceError> {
        self.grid_points(resolution, fixed)?
            .into_par_iter()
            .map(|u| {
                let latent = self.u_to_latent(&u)?;
                Ok(GridPoint { u, latent })
            })
            .collect()
    }

    pub fn similarity(&self, u_i: &UPoint, u_j: &UPoint) -> Result<Similarity, SpaceError> {
        let w_i = self.weights(u_i)?;
        let w_j = self.weights(u_j)?;
        let approx = w_i.dot(&w_j).clamp(-1.0, 1.0);
        let e_i = self.seeds.combine_inner(w_i.as_slice())?;
        let e_j = self.seeds.combine_inner(w_j.as_slice())?;
        let dot: f64 = e_i.iter().zip(&e_j).map(|(a, b)| a * b).sum();
        let n_i = e_i.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n_j = e_j.iter().map(|v| v * v).sum::<f64>().sqrt();
        let exact = (dot / (n_i * n_j)).clamp(-1.0, 1.0);
        Ok(Similarity { approx, exact })
    }
}

/// A latent objective seen through the chart, for optimisers over `[0,1]^{K−1}`.
pub struct SpaceObjective<'a, O: ?Sized> {
    space: &'a SurrogateSpace,
    inner: &'a mut O,
}

impl<'a, O: Objective + ?Sized> SpaceObjective<'a, O> {
    pub fn new(space: &'a SurrogateSpace, inner: &'a mut O) -> Self {
        SpaceObjective { space, inner }
    }
}

impl<O: Objective + ?Sized> Objective for SpaceObjective<'_, O> {
    fn evaluate(&mut self, u: &[f64]) -> Result<f64, ObjectiveError> {
        let z = self.space.u_slice_to_latent(u).map_err(|e| ObjectiveError(e.to_string()))?;
        self.inner.evaluate(&z)
    }
}
