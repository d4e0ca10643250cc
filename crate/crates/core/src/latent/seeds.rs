use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::{norm2, ComponentSpec, LatentSpec};
use super::LatentError;
use crate::charts::WeightVector;
use crate::linalg::{pseudo_inverse, spectral_norm};

/// Tolerance on `‖w‖₂ - 1` for weights passed to the combination map.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Relative residual above which a latent is outside the span of the seeds.
pub const SPAN_RESIDUAL_TOL: f64 = 1e-6;
/// Allowed deviation of `ξ⁺ξ` from the identity (spectral norm).
pub const LEFT_INVERSE_TOL: f64 = 1e-8;
/// Recovered weights below this are outside the positive orthant.
pub const ORTHANT_TOL: f64 = 1e-9;

/// `K` seed latents together with their inner latents `ξ` (D×K) and `ξ⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    spec: LatentSpec,
    seeds: DMatrix<f64>,
    xi: DMatrix<f64>,
    xi_pinv: DMatrix<f64>,
}

/// Pre-normalisation output of the inverse map.
#[derive(Debug, Clone)]
pub struct RawInverse {
    /// `ξ⁺ T→(z)`.
    pub weights: Vec<f64>,
    /// `‖T→(z) − ξ ξ⁺ T→(z)‖ / ‖T→(z)‖`.
    pub relative_residual: f64,
}

impl SeedSet {
    /// `k` independent draws from the latent distribution.
    pub fn sample(spec: LatentSpec, k: usize, rng_seed: u64) -> Result<Self, LatentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let seeds: Vec<Vec<f64>> = (0..k).map(|_| spec.sample(&mut rng)).collect();
        Self::from_latents(spec, &seeds)
    }

    /// Build from seed latents `z_1..z_K`.
    pub fn from_latents(spec: LatentSpec, seeds: &[Vec<f64>]) -> Result<Self, LatentError> {
        if seeds.is_empty() {
            return Err(LatentError::RankDeficient { rank: 0, k: 0 });
        }
        let d = spec.total_dim();
        let mut z = DMatrix::zeros(d, seeds.len());
        let mut xi = DMatrix::zeros(d, seeds.len());
        for (k, seed) in seeds.iter().enumerate() {
            let eps = spec.to_inner(seed)?;
            z.set_column(k, &DVector::from_column_slice(seed));
            xi.set_column(k, &DVector::from_vec(eps));
        }
        Self::assemble(spec, z, xi)
    }

    /// Build from a precomputed inner-latent matrix; seeds become `T←(ε_k)`.
    pub fn from_inner_matrix(spec: LatentSpec, xi: DMatrix<f64>) -> Result<Self, LatentError> {
        if xi.nrows() != spec.total_dim() {
            return Err(LatentError::DimensionMismatch {
                expected: spec.total_dim(),
                got: xi.nrows(),
            });
        }
        if xi.ncols() == 0 {
            return Err(LatentError::RankDeficient { rank: 0, k: 0 });
        }
        let mut z = DMatrix::zeros(xi.nrows(), xi.ncols());
        for k in 0..xi.ncols() {
            let col: Vec<f64> = xi.column(k).iter().copied().collect();
            z.set_column(k, &DVector::from_vec(spec.from_inner(&col)?));
        }
        Self::assemble(spec, z, xi)
    }

    fn assemble(spec: LatentSpec, seeds: DMatrix<f64>, xi: DMatrix<f64>) -> Result<Self, LatentError> {
        let k = xi.ncols();
        let p = pseudo_inverse(&xi);
        if p.rank < k {
            return Err(LatentError::RankDeficient { rank: p.rank, k });
        }
        let deviation = spectral_norm(&(&p.pinv * &xi - DMatrix::<f64>::identity(k, k)));
        if deviation > LEFT_INVERSE_TOL {
            return Err(LatentError::IllConditioned { deviation });
        }
        Ok(SeedSet { spec, seeds, xi, xi_pinv: p.pinv })
    }

    pub fn spec(&self) -> &LatentSpec {
        &self.spec
    }

    /// Number of seeds `K`.
    pub fn k(&self) -> usize {
        self.xi.ncols()
    }

    /// Latent dimension `D`.
    pub fn dim(&self) -> usize {
        self.xi.nrows()
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    pub fn xi_pinv(&self) -> &DMatrix<f64> {
        &self.xi_pinv
    }

    pub fn seed(&self, k: usize) -> Vec<f64> {
        self.seeds.column(k).iter().copied().collect()
    }

    pub fn seeds(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|k| self.seed(k)).collect()
    }

    pub fn inner(&self, k: usize) -> Vec<f64> {
        self.xi.column(k).iter().copied().collect()
    }

    /// `ξ w` for arbitrary weights, no normalisation.
    pub fn combine_inner(&self, w: &[f64]) -> Result<Vec<f64>, LatentError> {
        if w.len() != self.k() {
            return Err(LatentError::DimensionMismatch { expected: self.k(), got: w.len() });
        }
        let eps = &self.xi * DVector::from_column_slice(w);
        Ok(eps.iter().copied().collect())
    }

    /// `T←(ξ w)` for any unit-norm `w` on the full sphere (signs allowed).
    pub fn combine(&self, w: &[f64]) -> Result<Vec<f64>, LatentError> {
        let norm = norm2(w);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(LatentError::NotUnitNorm { norm });
        }
        self.spec.from_inner(&self.combine_inner(w)?)
    }

    /// The LOL map: `z = T←(ξ w)` for `w` on the positive orthant.
    pub fn lol_combine(&self, w: &WeightVector) -> Result<Vec<f64>, LatentError> {
        self.combine(w.as_slice())
    }

    /// `ξ⁺ T→(z)` and the relative span residual, before normalisation.
    pub fn raw_inverse(&self, z: &[f64]) -> Result<RawInverse, LatentError> {
        let eps = DVector::from_vec(self.spec.to_inner(z)?);
        let eps_norm = eps.norm();
        if eps_norm == 0.0 {
            return Err(LatentError::ZeroWeight);
        }
        let weights = &self.xi_pinv * &eps;
        let residual = (&eps - &self.xi * &weights).norm() / eps_norm;
        Ok(RawInverse { weights: weights.iter().copied().collect(), relative_residual: residual })
    }

    /// Inverse for composite specs that mix sphere blocks with other blocks.
    ///
    /// Each sphere block of `T→(z)` is `ξ_b w / ‖ξ_b w‖`, so it carries its own
    /// unknown scale `n_b`. Solve `ξ_b w = n_b ε_b` jointly with the unscaled
    /// blocks in least squares. With only sphere blocks the first scale is
    /// pinned to 1, since `w` is normalised afterwards anyway.
    pub fn block_scaled_inverse(&self, z: &[f64]) -> Result<RawInverse, LatentError> {
        let eps = self.spec.to_inner(z)?;
        let k = self.k();
        let spheres: Vec<_> = self
            .spec
            .blocks()
            .filter(|(c, _)| matches!(c, ComponentSpec::Sphere { .. }))
            .map(|(_, r)| r)
            .collect();
        let all_sphere = spheres.iter().map(|r| r.len()).sum::<usize>() == eps.len();
        let free = if all_sphere { &spheres[1..] } else { &spheres[..] };
        let mut m = DMatrix::zeros(eps.len(), k + free.len());
        m.view_mut((0, 0), (eps.len(), k)).copy_from(&self.xi);
        let mut rhs = DVector::zeros(eps.len());
        let mut in_free = vec![false; eps.len()];
        for (b, range) in free.iter().enumerate() {
            for i in range.clone() {
                m[(i, k + b)] = -eps[i];
                in_free[i] = true;
            }
        }
        for i in 0..eps.len() {
            if !in_free[i] {
                rhs[i] = eps[i];
            }
        }
        let rhs_norm = rhs.norm();
        if rhs_norm == 0.0 {
            return Err(LatentError::ZeroWeight);
        }
        let solution = pseudo_inverse(&m).pinv * &rhs;
        let residual = (&m * &solution - &rhs).norm() / rhs_norm;
        if solution.rows(k, free.len()).iter().any(|&n| !(n > 0.0)) {
            return Err(LatentError::NotInSpan { residual: f64::INFINITY });
        }
        Ok(RawInverse { weights: solution.rows(0, k).iter().copied().collect(), relative_residual: residual })
    }

    /// Unit-norm weights on the full sphere reproducing `z`.
    pub fn invert_signed(&self, z: &[f64]) -> Result<Vec<f64>, LatentError> {
        let mixed = self.spec.has_sphere() && self.spec.components().len() > 1;
        let raw = if mixed { self.block_scaled_inverse(z)? } else { self.raw_inverse(z)? };
        if raw.relative_residual > SPAN_RESIDUAL_TOL {
            return Err(LatentError::NotInSpan { residual: raw.relative_residual });
        }
        let norm = norm2(&raw.weights);
        if norm < 1e-300 || !norm.is_finite() {
            return Err(LatentError::ZeroWeight);
        }
        Ok(raw.weights.iter().map(|w| w / norm).collect())
    }

    /// Inverse LOL map: `w = ξ⁺T→(z) / ‖ξ⁺T→(z)‖` on the positive orthant.
    pub fn lol_invert(&self, z: &[f64]) -> Result<WeightVector, LatentError> {
        let w = self.invert_signed(z)?;
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -ORTHANT_TOL {
            return Err(LatentError::OutsideOrthant { min_weight: min });
        }
        Ok(WeightVector::from_clamped(w))
    }

    /// Negate seed `k` (0-based): `ε_k → −ε_k`, `z_k → T←(−ε_k)`.
    pub fn negate_seed(&self, k: usize) -> Result<SeedSet, LatentError> {
        if k >= self.k() {
            return Err(LatentError::IndexOutOfRange { index: k, len: self.k() });
        }
        let mut out = self.clone();
        let neg: Vec<f64> = self.xi.column(k).iter().map(|v| -v).collect();
        out.seeds.set_column(k, &DVector::from_vec(self.spec.from_inner(&neg)?));
        out.xi.column_mut(k).neg_mut();
        // pinv(ξ S) = S pinv(ξ) for a diagonal sign matrix S.
        out.xi_pinv.row_mut(k).neg_mut();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_seeds(d: usize, k: usize, seed: u64) -> SeedSet {
        let spec = LatentSpec::gaussian(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<Vec<f64>> = (0..k).map(|_| spec.sample(&mut rng)).collect();
        SeedSet::from_latents(spec, &seeds).unwrap()
    }

    #[test]
    fn single_seed_identity() {
        let set = gaussian_seeds(6, 1, 1);
        let w = WeightVector::new(vec![1.0]).unwrap();
        assert_eq!(set.lol_combine(&w).unwrap(), set.seed(0));
    }

    #[test]
    fn orthonormal_pair_combines_linearly() {
        let spec = LatentSpec::gaussian(2).unwrap();
        let set = SeedSet::from_latents(spec, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let h = 0.5_f64.sqrt();
        let w = WeightVector::new(vec![h, h]).unwrap();
        let z = set.lol_combine(&w).unwrap();
        assert!((z[0] - h).abs() < 1e-15 && (z[1] - h).abs() < 1e-15);
    }

    #[test]
    fn seeds_invert_to_basis_vectors() {
        let set = gaussian_seeds(16, 4, 2);
        let w = set.lol_invert(&set.seed(1)).unwrap();
        for (i, wi) in w.as_slice().iter().enumerate() {
            let expected = if i == 1 { 1.0 } else { 0.0 };
            assert!((wi - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_raw_inverse_is_already_unit_norm() {
        let set = gaussian_seeds(32, 5, 3);
        let w = WeightVector::from_clamped(vec![0.2, 0.5, 0.1, 0.7, 0.4]);
        let z = set.lol_combine(&w).unwrap();
        let raw = set.raw_inverse(&z).unwrap();
        assert!((norm2(&raw.weights) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unit_norm_required() {
        let set = gaussian_seeds(8, 2, 4);
        assert!(matches!(set.combine(&[1.0, 1.0]), Err(LatentError::NotUnitNorm { .. })));
        assert!(matches!(set.combine(&[1.0]), Err(LatentError::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicated_seeds_are_rejected() {
        let spec = LatentSpec::gaussian(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = spec.sample(&mut rng);
        let b = spec.sample(&mut rng);
        let err = SeedSet::from_latents(spec, &[a.clone(), b, a]).unwrap_err();
        assert!(matches!(err, LatentError::RankDeficient { rank: 2, k: 3 }));
    }

    #[test]
    fn fresh_latent_is_not_in_span() {
        let set = gaussian_seeds(32, 3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let z = set.spec().sample(&mut rng);
        assert!(matches!(set.lol_invert(&z), Err(LatentError::NotInSpan { .. })));
    }

    #[test]
    fn negative_combinations_are_outside_orthant() {
        let set = gaussian_seeds(16, 2, 7);
        let h = 0.5_f64.sqrt();
        let z = set.combine(&[h, -h]).unwrap();
        assert!(matches!(set.lol_invert(&z), Err(LatentError::OutsideOrthant { .. })));
        let w = set.invert_signed(&z).unwrap();
        assert!((w[0] - h).abs() < 1e-10 && (w[1] + h).abs() < 1e-10);
    }

    #[test]
    fn negation_is_an_involution() {
        let set = gaussian_seeds(12, 3, 8);
        let twice = set.negate_seed(2).unwrap().negate_seed(2).unwrap();
        assert_eq!(twice.xi(), set.xi());
        assert!(matches!(set.negate_seed(3), Err(LatentError::IndexOutOfRange { .. })));
    }

    #[test]
    fn negation_matches_signed_weights() {
        let set = gaussian_seeds(12, 2, 9);
        let negated = set.negate_seed(1).unwrap();
        let h = 0.5_f64.sqrt();
        let a = negated.combine_inner(&[h, h]).unwrap();
        let b = set.combine_inner(&[h, -h]).unwrap();
        assert_eq!(a, b);
        let eye = negated.xi_pinv() * negated.xi();
        assert!((eye - DMatrix::<f64>::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn negated_seed_set_keeps_full_rank() {
        let set = gaussian_seeds(10, 4, 10);
        let negated = set.negate_seed(0).unwrap();
        // Independent rank check: rebuild from the negated seeds from scratch.
        let rebuilt = SeedSet::from_latents(set.spec().clone(), &negated.seeds()).unwrap();
        assert_eq!(rebuilt.k(), 4);
        assert_eq!(crate::linalg::pseudo_inverse(negated.xi()).rank, 4);
    }

    #[test]
    fn sphere_seed_set_round_trips() {
        let spec = LatentSpec::new(vec![ComponentSpec::Sphere { dim: 64 }]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seeds: Vec<Vec<f64>> = (0..3).map(|_| spec.sample(&mut rng)).collect();
        let set = SeedSet::from_latents(spec, &seeds).unwrap();
        let w = WeightVector::from_clamped(vec![0.3, 0.9, 0.2]);
        let z = set.lol_combine(&w).unwrap();
        assert!((norm2(&z) - 1.0).abs() < 1e-12);
        let back = set.lol_invert(&z).unwrap();
        for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn composite_with_sphere_block_round_trips() {
        let spec = LatentSpec::new(vec![
            ComponentSpec::standard_gaussian(6),
            ComponentSpec::Sphere { dim: 8 },
            ComponentSpec::Sphere { dim: 4 },
        ])
        .unwrap();
        let set = SeedSet::sample(spec.clone(), 4, 12).unwrap();
        let w = WeightVector::from_clamped(vec![0.1, 0.6, 0.3, 0.5]);
        let z = set.lol_combine(&w).unwrap();
        // The paper's single-projection formula leaves the span here.
        assert!(set.raw_inverse(&z).unwrap().relative_residual > 1e-3);
        let back = set.lol_invert(&z).unwrap();
        for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }

        let spheres = LatentSpec::new(vec![ComponentSpec::Sphere { dim: 8 }, ComponentSpec::Sphere { dim: 6 }]).unwrap();
        let set = SeedSet::sample(spheres, 3, 13).unwrap();
        let w = WeightVector::from_clamped(vec![0.7, 0.2, 0.4]);
        let back = set.lol_invert(&set.lol_combine(&w).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
