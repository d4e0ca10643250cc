//! Moore–Penrose pseudoinverse via SVD, with numerical rank.

pub use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub pinv: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// Singular values at or below `max(rows, cols) · eps · σ_max` count as zero.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn pseudo_inverse(m: &DMatrix<f64>) -> PseudoInverse {
    let (rows, cols) = m.shape();
    let svd = m.clone().svd(true, true);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let sigma_max = singular_values.iter().copied().fold(0.0, f64::max);
    let tol = rank_tolerance(rows, cols, sigma_max);

    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut pinv = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (i, &s) in singular_values.iter().enumerate() {
        if s > tol {
            rank += 1;
            // pinv += v_i (1/s) u_iᵀ
            let v_i = v_t.row(i).transpose();
            let u_i = u.column(i);
            pinv.ger(1.0 / s, &v_i, &u_i, 1.0);
        }
    }
    // The SVD's bidiagonal iteration can stop with ~1e-8 backward error even
    // on well-conditioned input; Newton–Schulz steps X ← 2X − XAX square the
    // residual each time.
    if rank > 0 {
        for _ in 0..REFINE_STEPS {
            let xa = &pinv * m;
            pinv = &pinv * 2.0 - xa * &pinv;
        }
    }
    PseudoInverse { pinv, rank, singular_values }
}

const REFINE_STEPS: usize = 2;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}
