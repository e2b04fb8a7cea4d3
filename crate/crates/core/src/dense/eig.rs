//! Nonsymmetric eigenvalue machinery: Householder reduction to Hessenberg
//! form, the Francis implicit double-shift QR iteration, the real Schur form,
//! and a full complex eigendecomposition of upper Hessenberg matrices with
//! eigenvectors obtained by shifted inverse iteration.
//!
//! Balancing is deliberately NOT applied unless requested: the reduced
//! matrices produced by sketched iterations are badly balanced on purpose and
//! silently rescaling them would change exactly the effects this crate is
//! meant to expose. `hessenberg_eig_opts` takes a flag for cross-checks.

use num_complex::Complex64;

use super::lu::{clu_factor, ShiftedHessenbergSolver};
use super::{cnorm2, norm2, CMat, Mat};
use crate::error::{Error, Result};

/// Gap (relative to the matrix norm) below which a spectrum is reported as
/// defective-to-tolerance.
const DEFECT_GAP_RTOL: f64 = 1e-12;

/// Complex eigendecomposition `M = X diag(lambdas) X^{-1}`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Right eigenvectors as columns, unit 2-norm, first significant
    /// component real-positive. Conjugate pairs hold conjugate columns.
    pub x: CMat,
    pub lambdas: Vec<Complex64>,
    pub xinv: CMat,
    /// Smallest pairwise eigenvalue gap fell below `1e-12 * ||M||`.
    pub defect_warning: bool,
}

impl EigenDecomposition {
    /// alpha_i = e_d^T X e_i (last row of X).
    pub fn alpha(&self, i: usize) -> Complex64 {
        self.x[(self.x.rows() - 1, i)]
    }

    /// beta_i = e_i^T X^{-1} e_1 (first column of X^{-1}).
    pub fn beta(&self, i: usize) -> Complex64 {
        self.xinv[(i, 0)]
    }

    /// 1-norm condition estimate of the eigenvector basis.
    pub fn kappa_est(&self) -> f64 {
        self.x.norm_one() * self.xinv.norm_one()
    }
}

/// Real Schur form `M = Z R Z^T` with quasi-upper-triangular `R` whose 2x2
/// diagonal blocks all carry complex conjugate eigenvalue pairs.
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub z: Mat,
    pub r: Mat,
    pub eigenvalues: Vec<Complex64>,
}

/// Householder similarity reduction to upper Hessenberg form.
/// Returns `(H, P)` with `M = P H P^T`.
pub fn hessenberg_reduce(m: &Mat) -> (Mat, Mat) {
    assert!(m.is_square());
    let n = m.rows();
    let mut h = m.clone();
    let mut p = Mat::identity(n);
    for k in 0..n.saturating_sub(2) {
        let tail: Vec<f64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let tail_norm = norm2(&tail);
        if tail_norm == 0.0 {
            continue;
        }
        let alpha = if tail[0] >= 0.0 { -tail_norm } else { tail_norm };
        let mut v = tail;
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn == 0.0 {
            continue;
        }
        for vi in &mut v {
            *vi /= vn;
        }
        // H <- Q H Q with Q = I - 2 v v^T acting on rows/cols k+1..n.
        for j in 0..n {
            let mut c = 0.0;
            for i in k + 1..n {
                c += v[i - k - 1] * h[(i, j)];
            }
            c *= 2.0;
            for i in k + 1..n {
                h[(i, j)] -= c * v[i - k - 1];
            }
        }
        for i in 0..n {
            let mut c = 0.0;
            for j in k + 1..n {
                c += h[(i, j)] * v[j - k - 1];
            }
            c *= 2.0;
            for j in k + 1..n {
                h[(i, j)] -= c * v[j - k - 1];
            }
        }
        for i in 0..n {
            let mut c = 0.0;
            for j in k + 1..n {
                c += p[(i, j)] * v[j - k - 1];
            }
            c *= 2.0;
            for j in k + 1..n {
                p[(i, j)] -= c * v[j - k - 1];
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    (h, p)
}

/// EISPACK-style diagonal balancing (no permutations, so Hessenberg structure
/// is preserved). Returns the scaled matrix and the diagonal `D` such that
/// `balanced = D^{-1} M D`.
pub fn balance(m: &Mat) -> (Mat, Vec<f64>) {
    let n = m.rows();
    let mut a = m.clone();
    let mut d = vec![1.0; n];
    let radix: f64 = 2.0;
    let mut done = false;
    let mut rounds = 0;
    while !done && rounds < 100 {
        done = true;
        rounds += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut c2 = c;
            while c2 < r / radix {
                f *= radix;
                c2 *= radix * radix;
            }
            while c2 > r * radix {
                f /= radix;
                c2 /= radix * radix;
            }
            if (c2 + r / f) < 0.95 * s && f != 1.0 {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    let v = a[(i, j)] / f;
                    a[(i, j)] = v;
                }
                for j in 0..n {
                    let v = a[(j, i)] * f;
                    a[(j, i)] = v;
                }
            }
        }
    }
    (a, d)
}

struct Francis {
    t: Mat,
    z: Option<Mat>,
    eigenvalues: Vec<Complex64>,
}

/// Francis implicit double-shift QR on an upper Hessenberg matrix. Returns
/// the (quasi-triangular) Schur factor, optionally the accumulated orthogonal
/// transform, and the eigenvalues in diagonal order. 2x2 blocks with real
/// eigenvalues are split, so surviving 2x2 blocks carry conjugate pairs.
fn francis_qr(h_in: &Mat, accumulate: bool) -> Result<Francis> {
    let n = h_in.rows();
    let mut h = h_in.clone();
    // Hygiene: the algorithm never reads below the subdiagonal.
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = 0.0;
        }
    }
    let mut z = if accumulate { Some(Mat::identity(n)) } else { None };
    let anorm = h.norm_fro().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let max_sweeps = 50 * n.max(1);
    let mut total_sweeps = 0usize;
    let mut hi = n; // exclusive end of the active block
    let mut iter = 0usize;
    while hi > 1 {
        let m = hi - 1;
        // Look for a negligible subdiagonal entry from the bottom.
        let mut l = m;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = anorm;
            }
            if h[(l, l - 1)].abs() <= eps * s {
                h[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }
        if l == m {
            hi -= 1;
            iter = 0;
            continue;
        }
        if l == m - 1 {
            split_or_keep_2x2(&mut h, z.as_mut(), l);
            hi -= 2;
            iter = 0;
            continue;
        }
        iter += 1;
        total_sweeps += 1;
        if total_sweeps > max_sweeps {
            return Err(Error::EigNonConvergence { sweeps: total_sweeps, size: n });
        }
        let (s_tr, t_det) = if iter % 10 == 0 {
            // Ad hoc exceptional shift to break symmetry-induced cycles.
            let a = h[(m, m - 1)].abs() + h[(m - 1, m - 2)].abs();
            (1.5 * a, a * a)
        } else {
            (
                h[(m - 1, m - 1)] + h[(m, m)],
                h[(m - 1, m - 1)] * h[(m, m)] - h[(m - 1, m)] * h[(m, m - 1)],
            )
        };
        double_shift_sweep(&mut h, z.as_mut(), l, m, s_tr, t_det);
    }
    let eigenvalues = read_eigenvalues(&h);
    Ok(Francis { t: h, z, eigenvalues })
}

/// One implicit double-shift sweep on the active block `l..=m` (size >= 3).
fn double_shift_sweep(h: &mut Mat, mut z: Option<&mut Mat>, l: usize, m: usize, s_tr: f64, t_det: f64) {
    let n = h.rows();
    let mut x = h[(l, l)] * h[(l, l)] + h[(l, l + 1)] * h[(l + 1, l)] - s_tr * h[(l, l)] + t_det;
    let mut y = h[(l + 1, l)] * (h[(l, l)] + h[(l + 1, l + 1)] - s_tr);
    let mut w = h[(l + 1, l)] * h[(l + 2, l + 1)];
    // Keep the shift vector at a sane scale.
    let scale = x.abs() + y.abs() + w.abs();
    if scale != 0.0 {
        x /= scale;
        y /= scale;
        w /= scale;
    }
    for k in l..=m - 2 {
        let (v0, v1, v2) = if k == l {
            (x, y, w)
        } else {
            (h[(k, k - 1)], h[(k + 1, k - 1)], h[(k + 2, k - 1)])
        };
        let vnorm = (v0 * v0 + v1 * v1 + v2 * v2).sqrt();
        if vnorm == 0.0 {
            continue;
        }
        let alpha = if v0 >= 0.0 { -vnorm } else { vnorm };
        let mut u = [v0 - alpha, v1, v2];
        let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        if un == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|t| *t /= un);
        if k > l {
            h[(k, k - 1)] = alpha;
            h[(k + 1, k - 1)] = 0.0;
            h[(k + 2, k - 1)] = 0.0;
        }
        // Left: rows k..k+2, columns k..n-1.
        for j in k..n {
            let c = 2.0 * (u[0] * h[(k, j)] + u[1] * h[(k + 1, j)] + u[2] * h[(k + 2, j)]);
            h[(k, j)] -= c * u[0];
            h[(k + 1, j)] -= c * u[1];
            h[(k + 2, j)] -= c * u[2];
        }
        // Right: columns k..k+2, rows 0..=min(k+3, m).
        let rmax = (k + 3).min(m);
        for i in 0..=rmax {
            let c = 2.0 * (u[0] * h[(i, k)] + u[1] * h[(i, k + 1)] + u[2] * h[(i, k + 2)]);
            h[(i, k)] -= c * u[0];
            h[(i, k + 1)] -= c * u[1];
            h[(i, k + 2)] -= c * u[2];
        }
        if let Some(zm) = z.as_deref_mut() {
            for i in 0..n {
                let c = 2.0 * (u[0] * zm[(i, k)] + u[1] * zm[(i, k + 1)] + u[2] * zm[(i, k + 2)]);
                zm[(i, k)] -= c * u[0];
                zm[(i, k + 1)] -= c * u[1];
                zm[(i, k + 2)] -= c * u[2];
            }
        }
    }
    // Final 2-row reflector at k = m-1.
    let k = m - 1;
    let (v0, v1) = (h[(k, k - 1)], h[(k + 1, k - 1)]);
    let vnorm = (v0 * v0 + v1 * v1).sqrt();
    if vnorm != 0.0 {
        let alpha = if v0 >= 0.0 { -vnorm } else { vnorm };
        let mut u = [v0 - alpha, v1];
        let un = (u[0] * u[0] + u[1] * u[1]).sqrt();
        if un != 0.0 {
            u.iter_mut().for_each(|t| *t /= un);
            h[(k, k - 1)] = alpha;
            h[(k + 1, k - 1)] = 0.0;
            for j in k..n {
                let c = 2.0 * (u[0] * h[(k, j)] + u[1] * h[(k + 1, j)]);
                h[(k, j)] -= c * u[0];
                h[(k + 1, j)] -= c * u[1];
            }
            for i in 0..=m {
                let c = 2.0 * (u[0] * h[(i, k)] + u[1] * h[(i, k + 1)]);
                h[(i, k)] -= c * u[0];
                h[(i, k + 1)] -= c * u[1];
            }
            if let Some(zm) = z.as_deref_mut() {
                for i in 0..n {
                    let c = 2.0 * (u[0] * zm[(i, k)] + u[1] * zm[(i, k + 1)]);
                    zm[(i, k)] -= c * u[0];
                    zm[(i, k + 1)] -= c * u[1];
                }
            }
        }
    }
}

/// A converged trailing 2x2 block: split it by a rotation when its
/// eigenvalues are real, otherwise leave the (complex-pair) block in place.
fn split_or_keep_2x2(h: &mut Mat, z: Option<&mut Mat>, l: usize) {
    let (a, b) = (h[(l, l)], h[(l, l + 1)]);
    let (c0, d) = (h[(l + 1, l)], h[(l + 1, l + 1)]);
    let p = 0.5 * (a - d);
    let q = p * p + b * c0;
    if q < 0.0 {
        return;
    }
    let r = q.sqrt();
    let lam = if p >= 0.0 { d + p + r } else { d + p - r };
    // Eigenvector of the block for `lam`, picked from the better-scaled row.
    let cand1 = (b, lam - a);
    let cand2 = (lam - d, c0);
    let (v0, v1) = if cand1.0.abs() + cand1.1.abs() >= cand2.0.abs() + cand2.1.abs() {
        cand1
    } else {
        cand2
    };
    let vn = (v0 * v0 + v1 * v1).sqrt();
    if vn == 0.0 {
        // Block is already diagonal to working accuracy.
        h[(l + 1, l)] = 0.0;
        return;
    }
    let (gc, gs) = (v0 / vn, v1 / vn);
    let n = h.rows();
    // Similarity with G = [[gc, gs], [-gs, gc]]: rows then columns.
    for j in 0..n {
        let r0 = h[(l, j)];
        let r1 = h[(l + 1, j)];
        h[(l, j)] = gc * r0 + gs * r1;
        h[(l + 1, j)] = -gs * r0 + gc * r1;
    }
    for i in 0..n {
        let c0i = h[(i, l)];
        let c1i = h[(i, l + 1)];
        h[(i, l)] = gc * c0i + gs * c1i;
        h[(i, l + 1)] = -gs * c0i + gc * c1i;
    }
    if let Some(zm) = z {
        for i in 0..zm.rows() {
            let c0i = zm[(i, l)];
            let c1i = zm[(i, l + 1)];
            zm[(i, l)] = gc * c0i + gs * c1i;
            zm[(i, l + 1)] = -gs * c0i + gc * c1i;
        }
    }
    h[(l + 1, l)] = 0.0;
}

fn read_eigenvalues(t: &Mat) -> Vec<Complex64> {
    let n = t.rows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b) = (t[(i, i)], t[(i, i + 1)]);
            let (c0, d) = (t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mu = 0.5 * (a + d);
            let q = 0.25 * (a - d) * (a - d) + b * c0;
            let nu = (-q).max(0.0).sqrt();
            out.push(Complex64::new(mu, nu));
            out.push(Complex64::new(mu, -nu));
            i += 2;
        } else {
            out.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

fn check_hessenberg(m: &Mat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("eigendecomposition needs a square matrix".into()));
    }
    let tol = 1e-14 * m.norm_fro();
    for i in 0..m.rows() {
        for j in 0..i.saturating_sub(1) {
            if m[(i, j)].abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not upper Hessenberg: entry ({i}, {j}) = {}",
                    m[(i, j)]
                )));
            }
        }
    }
    Ok(())
}

/// Complex eigendecomposition of an upper Hessenberg matrix. Eigenvalues by
/// Francis double-shift QR, eigenvectors by shifted inverse iteration on the
/// Hessenberg matrix itself (O(d^2) per vector thanks to the structure).
/// No balancing unless requested via [`hessenberg_eig_opts`].
pub fn hessenberg_eig(m: &Mat) -> Result<EigenDecomposition> {
    hessenberg_eig_opts(m, false)
}

pub fn hessenberg_eig_opts(m: &Mat, balance_first: bool) -> Result<EigenDecomposition> {
    check_hessenberg(m)?;
    if balance_first {
        let (mb, d) = balance(m);
        let mut eig = eig_hessenberg_inner(&mb)?;
        // Undo the scaling on the eigenvectors: x_orig = D x_bal.
        let n = m.rows();
        for j in 0..n {
            let mut col: Vec<Complex64> = (0..n).map(|i| d[i] * eig.x[(i, j)]).collect();
            normalize_eigvec(&mut col);
            for i in 0..n {
                eig.x[(i, j)] = col[i];
            }
        }
        eig.xinv = invert_for_eig(&eig.x);
        Ok(eig)
    } else {
        eig_hessenberg_inner(m)
    }
}

fn eig_hessenberg_inner(m: &Mat) -> Result<EigenDecomposition> {
    let n = m.rows();
    let francis = francis_qr(m, false)?;
    let lambdas = francis.eigenvalues;
    let scale = m.norm_fro().max(f64::MIN_POSITIVE);
    let mut defect_warning = false;
    for i in 0..n {
        for j in i + 1..n {
            if (lambdas[i] - lambdas[j]).norm() < DEFECT_GAP_RTOL * scale {
                defect_warning = true;
            }
        }
    }
    let mut x = CMat::zeros(n, n);
    let eps3 = f64::EPSILON * scale;
    let mut used_shifts: Vec<Complex64> = Vec::new();
    for i in 0..n {
        // Conjugate partner of the previous column?
        if i > 0
            && lambdas[i].im != 0.0
            && lambdas[i] == lambdas[i - 1].conj()
            && lambdas[i].im < 0.0
        {
            for r in 0..n {
                x[(r, i)] = x[(r, i - 1)].conj();
            }
            continue;
        }
        let mut shift = lambdas[i];
        // Separate shifts of (numerically) coincident eigenvalues.
        let mut guard = 0;
        while used_shifts.iter().any(|s| (*s - shift).norm() < eps3) && guard < 64 {
            shift += Complex64::new(eps3, 0.0);
            guard += 1;
        }
        used_shifts.push(shift);
        let col = inverse_iteration(m, shift, scale);
        for r in 0..n {
            x[(r, i)] = col[r];
        }
    }
    let xinv = invert_for_eig(&x);
    Ok(EigenDecomposition { x, lambdas, xinv, defect_warning })
}

fn inverse_iteration(m: &Mat, shift: Complex64, scale: f64) -> Vec<Complex64> {
    let n = m.rows();
    let solver = ShiftedHessenbergSolver::new(m, shift);
    // Deterministic, mildly irregular start vector.
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(1.0 + 0.37 * ((j * 83 % 29) as f64) / 29.0, 0.0))
        .collect();
    let nv = cnorm2(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut best = v.clone();
    let mut best_res = f64::INFINITY;
    for _ in 0..3 {
        let mut w = solver.solve(&v);
        let nw = cnorm2(&w);
        if !nw.is_finite() || nw == 0.0 {
            break;
        }
        w.iter_mut().for_each(|z| *z /= nw);
        let res = hessenberg_eigvec_residual(m, shift, &w);
        if res < best_res {
            best_res = res;
            best = w.clone();
        }
        if res <= 100.0 * f64::EPSILON * scale {
            break;
        }
        v = w;
    }
    normalize_eigvec(&mut best);
    best
}

fn hessenberg_eigvec_residual(m: &Mat, lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = m.rows();
    let mut res = 0.0f64;
    for i in 0..n {
        let mut acc = -lambda * v[i];
        for j in i.saturating_sub(1)..n {
            acc += m[(i, j)] * v[j];
        }
        res += acc.norm_sqr();
    }
    res.sqrt()
}

/// Unit norm, first significant component rotated to the positive real axis.
fn normalize_eigvec(v: &mut [Complex64]) {
    let nv = cnorm2(v);
    if nv == 0.0 {
        return;
    }
    v.iter_mut().for_each(|z| *z /= nv);
    let maxc = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let thresh = maxc * f64::EPSILON.sqrt();
    if let Some(lead) = v.iter().find(|z| z.norm() >= thresh) {
        let phase = lead / lead.norm();
        let rot = phase.conj();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

fn invert_for_eig(x: &CMat) -> CMat {
    let n = x.rows();
    let lu = clu_factor(x);
    if !lu.is_singular() {
        if let Ok(inv) = lu.inverse() {
            return inv;
        }
    }
    // Exactly singular eigenvector basis (defective matrix): regularize so a
    // usable (if inaccurate) inverse is still reported alongside the warning.
    let mut xr = x.clone();
    let bump = Complex64::new(f64::EPSILON * x.norm_fro().max(1.0), 0.0);
    xr.shift_diagonal(bump);
    clu_factor(&xr).inverse().unwrap_or_else(|_| CMat::identity(n))
}

/// Real Schur form via Hessenberg reduction plus Francis QR with accumulation.
pub fn real_schur(m: &Mat) -> Result<SchurForm> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("Schur form needs a square matrix".into()));
    }
    let (h, p) = hessenberg_reduce(m);
    let francis = francis_qr(&h, true)?;
    let z = p.matmul(&francis.z.expect("accumulation requested"));
    Ok(SchurForm { z, r: francis.t, eigenvalues: francis.eigenvalues })
}

/// Eigendecomposition of a general square matrix: Hessenberg reduction first,
/// then [`hessenberg_eig`], then back-transformation of the vectors.
pub fn dense_eig(m: &Mat) -> Result<EigenDecomposition> {
    let (h, p) = hessenberg_reduce(m);
    let eig = eig_hessenberg_inner(&h)?;
    let n = m.rows();
    let mut x = CMat::zeros(n, n);
    for j in 0..n {
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += p[(i, k)] * eig.x[(k, j)];
            }
            col[i] = acc;
        }
        normalize_eigvec(&mut col);
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    let xinv = invert_for_eig(&x);
    Ok(EigenDecomposition { x, lambdas: eig.lambdas, xinv, defect_warning: eig.defect_warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn random_hessenberg(rng: &mut ChaCha20Rng, n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| if i <= j + 1 { rng.gen::<f64>() * 2.0 - 1.0 } else { 0.0 })
    }

    fn eig_residual(m: &Mat, e: &EigenDecomposition) -> f64 {
        let n = m.rows();
        let mc = m.to_complex();
        let mut worst = 0.0f64;
        for j in 0..n {
            let col = e.x.column(j);
            let mx = mc.matvec(&col);
            let mut r = 0.0;
            for i in 0..n {
                r += (mx[i] - e.lambdas[j] * col[i]).norm_sqr();
            }
            worst = worst.max(r.sqrt());
        }
        worst / m.norm_fro()
    }

    #[test]
    fn diagonal_matrix_is_its_own_eigensystem() {
        let mut m = Mat::zeros(4, 4);
        for (i, v) in [2.0, -1.0, 0.5, 7.0].iter().enumerate() {
            m[(i, i)] = *v;
        }
        let e = hessenberg_eig(&m).unwrap();
        let mut lams: Vec<f64> = e.lambdas.iter().map(|l| l.re).collect();
        lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(lams, vec![-1.0, 0.5, 2.0, 7.0]);
        assert!(eig_residual(&m, &e) < 1e-14);
    }

    #[test]
    fn companion_matrix_of_z2_minus_1() {
        // Companion of z^2 - 1 has eigenvalues +1 and -1.
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        let e = hessenberg_eig(&m).unwrap();
        let mut lams: Vec<f64> = e.lambdas.iter().map(|l| l.re).collect();
        lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((lams[0] + 1.0).abs() < 1e-14);
        assert!((lams[1] - 1.0).abs() < 1e-14);
        assert!(e.lambdas.iter().all(|l| l.im.abs() < 1e-14));
    }

    #[test]
    fn random_hessenberg_residual_and_char_poly() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let m = random_hessenberg(&mut rng, 12);
        let e = hessenberg_eig(&m).unwrap();
        assert!(eig_residual(&m, &e) < 1e-10, "residual {}", eig_residual(&m, &e));
        // Characteristic polynomial residual via the Newton correction
        // |p(lambda)/p'(lambda)| from a Hyman-style determinant evaluation.
        for &lam in &e.lambdas {
            let correction = char_poly_newton_correction(&m, lam);
            assert!(
                correction <= 1e-8 * m.norm_fro(),
                "char poly correction {correction} at {lam}"
            );
        }
        // X^{-1} X = I within tolerance.
        let mut prod = e.xinv.matmul(&e.x);
        prod.shift_diagonal(Complex64::new(-1.0, 0.0));
        assert!(prod.norm_fro() <= 1e-8 * 12.0);
    }

    // det(M - z I) and its derivative by product-form elimination on the
    // Hessenberg structure; independent of the QR iteration.
    fn char_poly_newton_correction(m: &Mat, z: Complex64) -> f64 {
        let h = 1e-7 * m.norm_fro();
        let p0 = hessenberg_det(m, z);
        let pp = (hessenberg_det(m, z + Complex64::new(h, 0.0))
            - hessenberg_det(m, z - Complex64::new(h, 0.0)))
            / Complex64::new(2.0 * h, 0.0);
        if pp.norm() == 0.0 {
            return if p0.norm() == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (p0 / pp).norm()
    }

    fn hessenberg_det(m: &Mat, z: Complex64) -> Complex64 {
        let n = m.rows();
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                a[(i, j)] = Complex64::new(m[(i, j)], 0.0);
            }
            a[(i, i)] -= z;
        }
        let mut det = Complex64::new(1.0, 0.0);
        for k in 0..n {
            // Pairwise pivoting keeps the product form stable.
            if k + 1 < n && a[(k + 1, k)].norm() > a[(k, k)].norm() {
                for j in k..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(k + 1, j)];
                    a[(k + 1, j)] = tmp;
                }
                det = -det;
            }
            let piv = a[(k, k)];
            det *= piv;
            if piv.norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if k + 1 < n {
                let f = a[(k + 1, k)] / piv;
                for j in k..n {
                    let v = f * a[(k, j)];
                    a[(k + 1, j)] -= v;
                }
            }
        }
        det
    }

    #[test]
    fn conjugate_pairs_are_exactly_conjugate() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let m = random_hessenberg(&mut rng, 9);
        let e = hessenberg_eig(&m).unwrap();
        let mut i = 0;
        while i < 9 {
            if e.lambdas[i].im != 0.0 {
                assert_eq!(e.lambdas[i].conj(), e.lambdas[i + 1]);
                for r in 0..9 {
                    assert_eq!(e.x[(r, i)].conj(), e.x[(r, i + 1)]);
                }
                i += 2;
            } else {
                i += 1;
            }
        }
    }

    #[test]
    fn eigenvalues_invariant_under_orthogonal_similarity() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let n = 10;
        let m = random_hessenberg(&mut rng, n);
        // Random orthogonal Q from QR of a random matrix.
        let g = Mat::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        let q = super::super::qr::thin_qr(&g).unwrap().q_mat();
        let similar = q.transpose().matmul(&m).matmul(&q);
        let (h2, _) = hessenberg_reduce(&similar);
        let e1 = hessenberg_eig(&m).unwrap();
        let e2 = hessenberg_eig(&h2).unwrap();
        let mut l1 = e1.lambdas.clone();
        let mut l2 = e2.lambdas.clone();
        let key = |a: &Complex64, b: &Complex64| {
            (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap()
        };
        l1.sort_by(|a, b| key(a, b));
        l2.sort_by(|a, b| key(a, b));
        for (a, b) in l1.iter().zip(&l2) {
            assert!((a - b).norm() < 1e-9 * m.norm_fro(), "{a} vs {b}");
        }
    }

    #[test]
    fn schur_reconstruction_and_block_structure() {
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let n = 15;
        let m = Mat::from_fn(n, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let s = real_schur(&m).unwrap();
        // Z orthogonal.
        let mut g = s.z.transpose().matmul(&s.z);
        g.shift_diagonal(-1.0);
        assert!(g.max_abs() <= 1e-12 * n as f64);
        // Reconstruction.
        let rec = s.z.matmul(&s.r).matmul(&s.z.transpose());
        assert!(rec.sub(&m).norm_fro() <= 1e-12 * m.norm_fro() * n as f64);
        // 2x2 blocks must carry complex pairs.
        let mut i = 0;
        while i + 1 < n {
            if s.r[(i + 1, i)] != 0.0 {
                let (a, b) = (s.r[(i, i)], s.r[(i, i + 1)]);
                let (c0, d) = (s.r[(i + 1, i)], s.r[(i + 1, i + 1)]);
                let q = 0.25 * (a - d) * (a - d) + b * c0;
                assert!(q < 0.0, "2x2 block with real eigenvalues left unsplit");
                i += 2;
            } else {
                i += 1;
            }
        }
    }

    #[test]
    fn schur_of_symmetric_matrix_is_diagonal() {
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        let n = 8;
        let g = Mat::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        let m = g.add(&g.transpose());
        let s = real_schur(&m).unwrap();
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(s.r[(i, j)].abs());
                }
            }
        }
        assert!(off <= 1e-12 * m.norm_fro() * n as f64, "off-diagonal {off}");
    }

    #[test]
    fn rotation_matrix_keeps_single_complex_block() {
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = -1.0;
        m[(1, 0)] = 1.0;
        let s = real_schur(&m).unwrap();
        assert!(s.r[(1, 0)] != 0.0, "block was incorrectly split");
        let lams = s.eigenvalues;
        assert!((lams[0] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((lams[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn balancing_does_not_change_eigenvalues() {
        let mut rng = ChaCha20Rng::seed_from_u64(26);
        let n = 8;
        let mut m = random_hessenberg(&mut rng, n);
        // Make it badly balanced.
        for i in 0..n {
            m[(i, n - 1)] *= 1e8;
        }
        let e1 = hessenberg_eig_opts(&m, false).unwrap();
        let e2 = hessenberg_eig_opts(&m, true).unwrap();
        let mut l1 = e1.lambdas.clone();
        let mut l2 = e2.lambdas.clone();
        let key = |a: &Complex64, b: &Complex64| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap();
        l1.sort_by(|a, b| key(a, b));
        l2.sort_by(|a, b| key(a, b));
        for (a, b) in l1.iter().zip(&l2) {
            assert!((a - b).norm() < 1e-6 * m.norm_fro(), "{a} vs {b}");
        }
    }
}
