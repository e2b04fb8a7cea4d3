//! LU factorizations with partial pivoting, real and complex, plus a
//! specialized O(d^2) solver for shifted Hessenberg systems.

use num_complex::Complex64;

use super::{CMat, Mat};
use crate::error::{Error, Result};

/// Real LU with partial pivoting, stored packed.
pub struct Lu {
    lu: Mat,
    piv: Vec<usize>,
    singular: bool,
}

pub fn lu_factor(a: &Mat) -> Lu {
    assert!(a.is_square());
    let n = a.rows();
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            piv.swap(k, p);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            if m != 0.0 {
                for j in k + 1..n {
                    let v = m * lu[(k, j)];
                    lu[(i, j)] -= v;
                }
            }
        }
    }
    Lu { lu, piv, singular }
}

impl Lu {
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.singular {
            return Err(Error::InvalidArgument("singular matrix in LU solve".into()));
        }
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &Mat) -> Result<Mat> {
        let mut out = Mat::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j))?;
            out.set_column(j, &col);
        }
        Ok(out)
    }
}

pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    lu_factor(a).solve_mat(b)
}

/// Complex LU with partial pivoting.
pub struct CLu {
    lu: CMat,
    piv: Vec<usize>,
    singular: bool,
}

pub fn clu_factor(a: &CMat) -> CLu {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].norm_sqr();
        for i in k + 1..n {
            let v = lu[(i, k)].norm_sqr();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            piv.swap(k, p);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            if m.re != 0.0 || m.im != 0.0 {
                for j in k + 1..n {
                    let v = m * lu[(k, j)];
                    lu[(i, j)] -= v;
                }
            }
        }
    }
    CLu { lu, piv, singular }
}

impl CLu {
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.singular {
            return Err(Error::InvalidArgument("singular matrix in complex LU solve".into()));
        }
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn solve_mat(&self, b: &CMat) -> Result<CMat> {
        let mut out = CMat::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j))?;
            for i in 0..b.rows() {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve_mat(&CMat::identity(self.lu.rows()))
    }
}

/// Factorization of `H - sigma I` for upper Hessenberg `H`, using Gaussian
/// elimination with pairwise row pivoting. Costs O(d^2) and each solve O(d^2).
pub struct ShiftedHessenbergSolver {
    u: CMat,
    // For step k: whether rows k and k+1 were swapped, and the multiplier.
    swaps: Vec<bool>,
    mults: Vec<Complex64>,
    singular_tol: f64,
}

impl ShiftedHessenbergSolver {
    /// `h` must be upper Hessenberg (entries below the first subdiagonal are
    /// ignored). Factors `h - shift*I`.
    pub fn new(h: &Mat, shift: Complex64) -> Self {
        let n = h.rows();
        let mut u = CMat::zeros(n, n);
        for i in 0..n {
            for j in (i.saturating_sub(1))..n {
                u[(i, j)] = Complex64::new(h[(i, j)], 0.0);
            }
            u[(i, i)] -= shift;
        }
        Self::factor(u)
    }

    pub fn new_complex(h: &CMat, shift: Complex64) -> Self {
        let n = h.rows();
        let mut u = h.clone();
        for i in 0..n {
            u[(i, i)] -= shift;
        }
        Self::factor(u)
    }

    fn factor(mut u: CMat) -> Self {
        let n = u.rows();
        let scale = u.norm_fro();
        let mut swaps = vec![false; n.saturating_sub(1)];
        let mut mults = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            if u[(k + 1, k)].norm() > u[(k, k)].norm() {
                swaps[k] = true;
                for j in k..n {
                    let tmp = u[(k, j)];
                    u[(k, j)] = u[(k + 1, j)];
                    u[(k + 1, j)] = tmp;
                }
            }
            let pivot = u[(k, k)];
            let m = if pivot.norm() > 0.0 { u[(k + 1, k)] / pivot } else { Complex64::new(0.0, 0.0) };
            mults[k] = m;
            u[(k + 1, k)] = Complex64::new(0.0, 0.0);
            if m.re != 0.0 || m.im != 0.0 {
                for j in k + 1..n {
                    let v = m * u[(k, j)];
                    u[(k + 1, j)] -= v;
                }
            }
        }
        let singular_tol = f64::EPSILON * scale;
        Self { u, swaps, mults, singular_tol }
    }

    /// Smallest pivot magnitude; near-zero means `shift` is (almost) an
    /// eigenvalue of `H`.
    pub fn min_pivot(&self) -> f64 {
        (0..self.u.rows()).map(|i| self.u[(i, i)].norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn is_numerically_singular(&self) -> bool {
        self.min_pivot() <= self.singular_tol
    }

    /// Solves `(H - sigma I) x = b`. When a pivot is exactly zero it is
    /// replaced by a tiny multiple of the matrix scale, the standard guard in
    /// inverse iteration.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.u.rows();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n.saturating_sub(1) {
            if self.swaps[k] {
                x.swap(k, k + 1);
            }
            let v = self.mults[k] * x[k];
            x[k + 1] -= v;
        }
        let guard = Complex64::new(self.singular_tol.max(f64::MIN_POSITIVE), 0.0);
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.u[(i, j)] * x[j];
            }
            let mut piv = self.u[(i, i)];
            if piv.norm() <= f64::MIN_POSITIVE {
                piv = guard;
            }
            x[i] = acc / piv;
        }
        x
    }
}
