//! Generic matrix functions through the eigendecomposition, and matrix-valued
//! divided differences via partial fractions (a diagnostics-scale tool).

use num_complex::Complex64;

use super::eig::dense_eig;
use super::expm::expm;
use super::lu::clu_factor;
use super::{CMat, Mat};
use crate::error::{Error, Result};
use crate::func::AnalyticFn;

/// `f(M) = X f(Lambda) X^{-1}` for a diagonalizable real matrix with a
/// well-conditioned eigenvector basis. For `f = exp` on badly conditioned
/// problems, use [`expm`] instead; this routine refuses once the eigenvector
/// condition estimate passes `1/sqrt(eps)`.
pub fn funm_eig(m: &Mat, f: &dyn AnalyticFn) -> Result<Mat> {
    let eig = dense_eig(m)?;
    let kappa = eig.kappa_est();
    if kappa > 1.0 / f64::EPSILON.sqrt() {
        return Err(Error::IllConditionedEigenvectors { kappa });
    }
    let n = m.rows();
    let mut fx = CMat::zeros(n, n);
    for j in 0..n {
        let fl = f.eval(eig.lambdas[j]);
        for i in 0..n {
            fx[(i, j)] = eig.x[(i, j)] * fl;
        }
    }
    let result = fx.matmul(&eig.xinv);
    let scale = result.norm_fro();
    if result.max_abs_imag() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(
            "matrix function result has a significant imaginary part; f does not map conjugate pairs to conjugate pairs".into(),
        ));
    }
    Ok(result.real_part())
}

/// Evaluates `f` on a real matrix, routing exponentials through scaling and
/// squaring and everything else through the eigendecomposition.
pub fn matrix_function(m: &Mat, f: &dyn AnalyticFn) -> Result<Mat> {
    if let Some(a) = f.exp_scale() {
        expm(&m.scale(a))
    } else {
        funm_eig(m, f)
    }
}

/// Matrix divided difference `f[M, lambda_1, ..., lambda_m]` computed by the
/// partial-fraction sum over the nodes,
/// `sum_i f[M, lambda_i] / omega'(lambda_i)` with
/// `f[M, lambda] = (f(M) - f(lambda) I)(M - lambda I)^{-1}`.
/// Diagnostics-scale only: one dense complex solve per node.
pub fn matrix_divided_difference(f: &dyn AnalyticFn, m: &Mat, nodes: &[Complex64]) -> Result<CMat> {
    let n = m.rows();
    assert!(m.is_square());
    assert!(!nodes.is_empty());
    let scale = nodes.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (i, a) in nodes.iter().enumerate() {
        for b in nodes.iter().skip(i + 1) {
            if (a - b).norm() <= 1e-10 * scale.max(1.0) {
                return Err(Error::BadNode { index: i, value: *a });
            }
        }
    }
    let fm = matrix_function(m, f)?.to_complex();
    let mc = m.to_complex();
    let mut acc = CMat::zeros(n, n);
    for (i, &lam) in nodes.iter().enumerate() {
        let mut omega_prime = Complex64::new(1.0, 0.0);
        for (j, &other) in nodes.iter().enumerate() {
            if j != i {
                omega_prime *= lam - other;
            }
        }
        let mut shifted = mc.clone();
        shifted.shift_diagonal(-lam);
        let lu = clu_factor(&shifted);
        if lu.is_singular() {
            return Err(Error::BadNode { index: i, value: lam });
        }
        // f[M, lam] = (M - lam I)^{-1} (f(M) - f(lam) I); the factors commute.
        let mut rhs = fm.clone();
        rhs.shift_diagonal(-f.eval(lam));
        let term = lu.solve_mat(&rhs)?;
        let weight = Complex64::new(1.0, 0.0) / omega_prime;
        for r in 0..n {
            for c in 0..n {
                let v = term[(r, c)] * weight;
                acc[(r, c)] += v;
            }
        }
    }
    Ok(acc)
}
