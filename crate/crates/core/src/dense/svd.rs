//! Singular values via one-sided Jacobi, preceded by a QR reduction for tall
//! matrices, plus fast extreme-singular-value estimates for triangular
//! factors (used for per-step condition-number traces).

use super::{norm2, qr::thin_qr, Mat};

/// Singular values of a dense matrix, sorted in decreasing order.
///
/// Tall inputs are first reduced by Householder QR; one-sided Jacobi sweeps
/// then rotate column pairs of the square factor until convergence.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let (s, m) = (a.rows(), a.cols());
    if m == 0 || s == 0 {
        return Vec::new();
    }
    let mut work = if s > m {
        thin_qr(a).expect("rows >= cols by construction").t_mat()
    } else if s < m {
        // Work on the transpose; singular values are shared.
        return singular_values(&a.transpose());
    } else {
        a.clone()
    };
    one_sided_jacobi(&mut work)
}

fn one_sided_jacobi(a: &mut Mat) -> Vec<f64> {
    let n = a.cols();
    let rows = a.rows();
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let x = a[(i, p)];
                    let y = a[(i, q)];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let x = a[(i, p)];
                    let y = a[(i, q)];
                    a[(i, p)] = c * x - s * y;
                    a[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n).map(|j| norm2(&a.column(j))).collect();
    sigma.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sigma
}

/// 2-norm condition number from exact singular values.
pub fn condition_number(a: &Mat) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        (Some(_), _) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Cheap estimate of the condition number of an upper triangular matrix by
/// power iteration (sigma_max on T^T T, sigma_min by inverse iteration with
/// triangular solves). Good to a few percent, O(iters * d^2); intended for
/// per-step diagnostics columns, not for asserted bounds.
pub fn condition_est_upper_triangular(t: &Mat) -> f64 {
    let n = t.rows();
    if n == 0 {
        return 1.0;
    }
    let diag_min = (0..n).map(|i| t[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    let sigma_max = power_sigma_max(t);
    if diag_min == 0.0 || sigma_max / diag_min > 1e17 {
        // Numerically singular; the inverse iteration below would overflow.
        return f64::INFINITY;
    }
    let sigma_min = inverse_power_sigma_min(t);
    if sigma_min <= 0.0 {
        f64::INFINITY
    } else {
        sigma_max / sigma_min
    }
}

fn power_sigma_max(t: &Mat) -> f64 {
    let n = t.rows();
    let mut x: Vec<f64> = (0..n).map(|j| 1.0 + ((j * 37 % 19) as f64) * 0.05).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = 0.0;
    for _ in 0..40 {
        let y = t.matvec(&x);
        let mut z = t.tr_matvec(&y);
        let nz = norm2(&z);
        if nz == 0.0 {
            return 0.0;
        }
        z.iter_mut().for_each(|v| *v /= nz);
        let new = nz.sqrt();
        let done = (new - sigma).abs() <= 1e-10 * new;
        sigma = new;
        x = z;
        if done {
            break;
        }
    }
    sigma
}

fn inverse_power_sigma_min(t: &Mat) -> f64 {
    let n = t.rows();
    let mut x: Vec<f64> = (0..n).map(|j| 1.0 - ((j * 29 % 23) as f64) * 0.04).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut inv_sigma = 0.0;
    for _ in 0..40 {
        // z = T^{-T} T^{-1} x
        let y = solve_upper(t, &x);
        let mut z = solve_upper_transposed(t, &y);
        let nz = norm2(&z);
        if !nz.is_finite() || nz == 0.0 {
            return 0.0;
        }
        z.iter_mut().for_each(|v| *v /= nz);
        let new = nz.sqrt();
        let done = (new - inv_sigma).abs() <= 1e-10 * new;
        inv_sigma = new;
        x = z;
        if done {
            break;
        }
    }
    if inv_sigma == 0.0 {
        0.0
    } else {
        1.0 / inv_sigma
    }
}

fn solve_upper(t: &Mat, b: &[f64]) -> Vec<f64> {
    let n = t.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= t[(i, j)] * x[j];
        }
        x[i] = acc / t[(i, i)];
    }
    x
}

fn solve_upper_transposed(t: &Mat, b: &[f64]) -> Vec<f64> {
    let n = t.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= t[(j, i)] * x[j];
        }
        x[i] = acc / t[(i, i)];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn diagonal_matrix_singular_values() {
        let mut m = Mat::zeros(5, 3);
        m[(0, 0)] = 3.0;
        m[(1, 1)] = -1e-7;
        m[(2, 2)] = 0.5;
        let sv = singular_values(&m);
        assert!((sv[0] - 3.0).abs() < 1e-14);
        assert!((sv[1] - 0.5).abs() < 1e-14);
        assert!((sv[2] - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn singular_values_match_gram_eigen_heuristic() {
        // sigma_i^2 sum equals Frobenius norm squared.
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let a = Mat::from_fn(20, 6, |_, _| rng.gen::<f64>() - 0.5);
        let sv = singular_values(&a);
        let fro2: f64 = sv.iter().map(|s| s * s).sum();
        assert!((fro2 - a.norm_fro().powi(2)).abs() < 1e-11 * fro2);
        // Orthogonal invariance: values of Q from QR are all 1.
        let q = thin_qr(&a).unwrap().q_mat();
        for s in singular_values(&q) {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triangular_condition_estimate_tracks_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let n = 25;
        let mut t = Mat::from_fn(n, n, |i, j| if i <= j { rng.gen::<f64>() - 0.5 } else { 0.0 });
        for i in 0..n {
            t[(i, i)] = 1.0 + 2.0 * (i as f64 / n as f64);
        }
        let exact = condition_number(&t);
        let est = condition_est_upper_triangular(&t);
        assert!(est / exact < 1.05 && exact / est < 1.05, "est {est} vs exact {exact}");
    }
}
