use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cdf::ScalarCdf;
use super::LatentError;

/// Largest accepted deviation of a sphere component's norm from 1.
pub const SPHERE_NORM_TOL: f64 = 1e-6;
/// Inner sphere blocks shorter than this cannot be projected back.
pub const ZERO_NORM_TOL: f64 = 1e-12;

/// One independent block of the latent vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComponentSpec {
    /// Diagonal Gaussian `N(mean, diag(scale²))`.
    Gaussian {
        dim: usize,
        #[serde(default)]
        mean: Vec<f64>,
        #[serde(default)]
        scale: Vec<f64>,
    },
    /// Uniform on the unit sphere in `R^dim`.
    Sphere { dim: usize },
    /// Independent coordinates with a shared scalar law.
    ScalarCdf { dim: usize, cdf: ScalarCdf },
}

impl ComponentSpec {
    pub fn standard_gaussian(dim: usize) -> Self {
        ComponentSpec::Gaussian { dim, mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        match self {
            ComponentSpec::Gaussian { dim, .. }
            | ComponentSpec::Sphere { dim }
            | ComponentSpec::ScalarCdf { dim, .. } => *dim,
        }
    }

    /// Fill defaulted Gaussian parameters and check invariants.
    fn normalised(self) -> Result<Self, LatentError> {
        match self {
            ComponentSpec::Gaussian { dim, mut mean, mut scale } => {
                if dim == 0 {
                    return Err(LatentError::InvalidSpec("gaussian dim must be >= 1".into()));
                }
                if mean.is_empty() {
                    mean = vec![0.0; dim];
                }
                if scale.is_empty() {
                    scale = vec![1.0; dim];
                }
                if mean.len() != dim || scale.len() != dim {
                    return Err(LatentError::InvalidSpec(format!(
                        "gaussian mean/scale lengths {}/{} do not match dim {dim}",
                        mean.len(),
                        scale.len()
                    )));
                }
                if mean.iter().any(|m| !m.is_finite()) {
                    return Err(LatentError::InvalidSpec("gaussian mean must be finite".into()));
                }
                if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(LatentError::InvalidSpec(
                        "gaussian scale must be strictly positive".into(),
                    ));
                }
                Ok(ComponentSpec::Gaussian { dim, mean, scale })
            }
            ComponentSpec::Sphere { dim } => {
                if dim < 2 {
                    return Err(LatentError::InvalidSpec("sphere dim must be >= 2".into()));
                }
                Ok(ComponentSpec::Sphere { dim })
            }
            ComponentSpec::ScalarCdf { dim, cdf } => {
                if dim == 0 {
                    return Err(LatentError::InvalidSpec("scalar_cdf dim must be >= 1".into()));
                }
                cdf.validate()?;
                Ok(ComponentSpec::ScalarCdf { dim, cdf })
            }
        }
    }
}

#[derive(Deserialize)]
struct RawLatentSpec {
    components: Vec<ComponentSpec>,
    #[serde(default)]
    total_dim: Option<usize>,
}

/// The latent distribution `p` as an ordered composition of independent blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLatentSpec")]
pub struct LatentSpec {
    components: Vec<ComponentSpec>,
    total_dim: usize,
}

impl TryFrom<RawLatentSpec> for LatentSpec {
    type Error = LatentError;

    fn try_from(raw: RawLatentSpec) -> Result<Self, Self::Error> {
        let spec = LatentSpec::new(raw.components)?;
        match raw.total_dim {
            Some(d) if d != spec.total_dim => Err(LatentError::InvalidSpec(format!(
                "total_dim {d} does not match component sum {}",
                spec.total_dim
            ))),
            _ => Ok(spec),
        }
    }
}

impl LatentSpec {
    pub fn new(components: Vec<ComponentSpec>) -> Result<Self, LatentError> {
        if components.is_empty() {
            return Err(LatentError::InvalidSpec("at least one component is required".into()));
        }
        let components = components
            .into_iter()
            .map(ComponentSpec::normalised)
            .collect::<Result<Vec<_>, _>>()?;
        let total_dim = components.iter().map(ComponentSpec::dim).sum();
        Ok(LatentSpec { components, total_dim })
    }

    /// Standard normal latent of dimension `dim`.
    pub fn gaussian(dim: usize) -> Result<Self, LatentError> {
        Self::new(vec![ComponentSpec::standard_gaussian(dim)])
    }

    /// Uniform latent on the unit sphere in `R^dim`.
    pub fn sphere(dim: usize) -> Result<Self, LatentError> {
        Self::new(vec![ComponentSpec::Sphere { dim }])
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    /// Components paired with the coordinate range each occupies.
    pub fn blocks(&self) -> impl Iterator<Item = (&ComponentSpec, Range<usize>)> {
        let mut offset = 0;
        self.components.iter().map(move |c| {
            let range = offset..offset + c.dim();
            offset = range.end;
            (c, range)
        })
    }

    pub fn has_sphere(&self) -> bool {
        self.components.iter().any(|c| matches!(c, ComponentSpec::Sphere { .. }))
    }

    fn check_len(&self, v: &[f64]) -> Result<(), LatentError> {
        if v.len() != self.total_dim {
            return Err(LatentError::DimensionMismatch { expected: self.total_dim, got: v.len() });
        }
        Ok(())
    }

    /// Forward transport `T→`: latent `z` to its inner latent `ε`.
    pub fn to_inner(&self, z: &[f64]) -> Result<Vec<f64>, LatentError> {
        self.check_len(z)?;
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(LatentError::NonFinite { index: i });
        }
        let mut eps = Vec::with_capacity(self.total_dim);
        for (component, (c, range)) in self.blocks().enumerate() {
            let block = &z[range.clone()];
            match c {
                ComponentSpec::Gaussian { mean, scale, .. } => {
                    eps.extend(block.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s));
                }
                ComponentSpec::Sphere { .. } => {
                    let norm = norm2(block);
                    if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                        return Err(LatentError::OffSphere { component, norm });
                    }
                    eps.extend_from_slice(block);
                }
                ComponentSpec::ScalarCdf { cdf, .. } => {
                    for (offset, &v) in block.iter().enumerate() {
                        let e = cdf
                            .to_normal(v)
                            .ok_or(LatentError::CdfDomain { index: range.start + offset, value: v })?;
                        eps.push(e);
                    }
                }
            }
        }
        Ok(eps)
    }

    /// Backward transport `T←`: inner latent `ε` to a latent in the support of `p`.
    pub fn from_inner(&self, eps: &[f64]) -> Result<Vec<f64>, LatentError> {
        self.check_len(eps)?;
        if let Some(i) = eps.iter().position(|v| !v.is_finite()) {
            return Err(LatentError::NonFinite { index: i });
        }
        let mut z = Vec::with_capacity(self.total_dim);
        for (component, (c, range)) in self.blocks().enumerate() {
            let block = &eps[range.clone()];
            match c {
                ComponentSpec::Gaussian { mean, scale, .. } => {
                    z.extend(block.iter().zip(mean).zip(scale).map(|((e, m), s)| m + s * e));
                }
                ComponentSpec::Sphere { .. } => {
                    let norm = norm2(block);
                    if norm < ZERO_NORM_TOL {
                        return Err(LatentError::ZeroVector { component });
                    }
                    z.extend(block.iter().map(|e| e / norm));
                }
                ComponentSpec::ScalarCdf { cdf, .. } => {
                    for (offset, &e) in block.iter().enumerate() {
                        let v = cdf
                            .from_normal(e)
                            .ok_or(LatentError::CdfDomain { index: range.start + offset, value: e })?;
                        z.push(v);
                    }
                }
            }
        }
        Ok(z)
    }

    /// Draw `z ~ p` by pushing a standard normal vector through `T←`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let eps: Vec<f64> = (0..self.total_dim).map(|_| rng.sample(StandardNormal)).collect();
            // A zero sphere block has probability zero; redraw if it happens.
            if let Ok(z) = self.from_inner(&eps) {
                return z;
            }
        }
    }

    /// Check that `z` lies in the support of `p`.
    pub fn check_support(&self, z: &[f64]) -> Result<(), LatentError> {
        self.to_inner(z).map(|_| ())
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
