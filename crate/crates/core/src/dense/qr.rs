//! Thin QR factorizations: a Householder-based batch factorization, a
//! Gram-Schmidt column-append update (used for the sketched basis), and an
//! incremental Householder QR for tall matrices whose columns arrive one at a
//! time (used for the Krylov basis itself, where the columns may become
//! numerically dependent).

use super::{axpy, dot, norm2, Mat};
use crate::error::{Error, Result};

/// Relative threshold below which an appended column is reported as lying
/// (numerically) in the span of the previous ones.
pub const NEAR_DEPENDENCE_RTOL: f64 = 1e-12;

/// Thin QR factors `B = Q T` with `Q` column-orthonormal (s x m) and `T`
/// upper triangular (m x m) with nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct QrFactors {
    s_rows: usize,
    q_cols: Vec<Vec<f64>>,
    /// Column j holds T[0..=j, j].
    t_cols: Vec<Vec<f64>>,
    deficient: Vec<usize>,
}

/// Result of appending one column via Gram-Schmidt.
#[derive(Debug, Clone, Copy)]
pub struct AppendOutcome {
    /// New diagonal entry of `T` (the norm of the orthogonalized remainder).
    pub tau: f64,
    /// Raised when `tau <= 1e-12 * ||b_new||`; the caller decides how to react.
    pub near_dependent: bool,
}

impl QrFactors {
    /// Empty factorization of vectors with `s_rows` entries.
    pub fn empty(s_rows: usize) -> Self {
        Self { s_rows, q_cols: Vec::new(), t_cols: Vec::new(), deficient: Vec::new() }
    }

    pub fn num_rows(&self) -> usize {
        self.s_rows
    }

    pub fn num_cols(&self) -> usize {
        self.q_cols.len()
    }

    pub fn deficient_columns(&self) -> &[usize] {
        &self.deficient
    }

    pub fn q_col(&self, j: usize) -> &[f64] {
        &self.q_cols[j]
    }

    pub fn t_entry(&self, i: usize, j: usize) -> f64 {
        if i > j {
            0.0
        } else {
            self.t_cols[j][i]
        }
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.t_cols[j][j]
    }

    pub fn q_mat(&self) -> Mat {
        Mat::from_columns(&self.q_cols)
    }

    pub fn t_mat(&self) -> Mat {
        let m = self.num_cols();
        Mat::from_fn(m, m, |i, j| self.t_entry(i, j))
    }

    /// Leading m x m block of `T`.
    pub fn t_leading(&self, m: usize) -> Mat {
        Mat::from_fn(m, m, |i, j| self.t_entry(i, j))
    }

    /// Appends one column by modified Gram-Schmidt against the current `Q`
    /// with one reorthogonalization pass.
    pub fn append_column(&mut self, b_new: &[f64]) -> AppendOutcome {
        assert_eq!(b_new.len(), self.s_rows, "column length mismatch");
        let m = self.num_cols();
        let b_norm = norm2(b_new);
        let mut w = b_new.to_vec();
        let mut t_col = vec![0.0; m + 1];
        for pass in 0..2 {
            for (j, q) in self.q_cols.iter().enumerate() {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
                t_col[j] += c;
            }
            if pass == 0 && m == 0 {
                break;
            }
        }
        let tau = norm2(&w);
        let near_dependent = tau <= NEAR_DEPENDENCE_RTOL * b_norm;
        if tau > 0.0 {
            for v in &mut w {
                *v /= tau;
            }
        } else {
            // Exactly dependent; keep a zero column so Q stays well-defined.
            w.iter_mut().for_each(|v| *v = 0.0);
            self.deficient.push(m);
        }
        t_col[m] = tau;
        self.q_cols.push(w);
        self.t_cols.push(t_col);
        AppendOutcome { tau, near_dependent }
    }

    /// `Q_m^T v` using the leading `m` columns.
    pub fn q_tr_matvec(&self, m: usize, v: &[f64]) -> Vec<f64> {
        (0..m).map(|j| dot(&self.q_cols[j], v)).collect()
    }

    /// `Q_m y`.
    pub fn q_matvec(&self, m: usize, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), m);
        let mut out = vec![0.0; self.s_rows];
        for j in 0..m {
            axpy(y[j], &self.q_cols[j], &mut out);
        }
        out
    }

    /// Back-substitution solve of `T_m x = rhs` on the leading block. A zero
    /// diagonal entry is replaced by a tiny guard so the solve stays finite.
    pub fn t_solve(&self, m: usize, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), m);
        let guard = f64::EPSILON * self.t_scale(m);
        let mut x = rhs.to_vec();
        for j in (0..m).rev() {
            let mut piv = self.t_cols[j][j];
            if piv == 0.0 {
                piv = guard.max(f64::MIN_POSITIVE);
            }
            x[j] /= piv;
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.t_cols[j][i] * xj;
            }
        }
        x
    }

    /// `lhs * T_m^{-1}` by forward column substitution (never forms the inverse).
    pub fn t_solve_right(&self, m: usize, lhs: &Mat) -> Mat {
        assert_eq!(lhs.cols(), m);
        let guard = f64::EPSILON * self.t_scale(m);
        let mut x = Mat::zeros(lhs.rows(), m);
        for j in 0..m {
            let mut col = lhs.column(j);
            for k in 0..j {
                let tkj = self.t_cols[j][k];
                if tkj != 0.0 {
                    for i in 0..lhs.rows() {
                        col[i] -= x[(i, k)] * tkj;
                    }
                }
            }
            let mut piv = self.t_cols[j][j];
            if piv == 0.0 {
                piv = guard.max(f64::MIN_POSITIVE);
            }
            for (i, v) in col.iter().enumerate() {
                x[(i, j)] = v / piv;
            }
        }
        x
    }

    /// `T_m * rhs`.
    pub fn t_matmul(&self, m: usize, rhs: &Mat) -> Mat {
        assert_eq!(rhs.rows(), m);
        let mut out = Mat::zeros(m, rhs.cols());
        for i in 0..m {
            for k in i..m {
                let tik = self.t_entry(i, k);
                if tik == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols() {
                    out[(i, j)] += tik * rhs[(k, j)];
                }
            }
        }
        out
    }

    fn t_scale(&self, m: usize) -> f64 {
        (0..m).map(|j| self.t_cols[j][j].abs()).fold(0.0, f64::max)
    }
}

/// Householder thin QR of a dense `s x m` matrix, `s >= m`. Exactly dependent
/// columns are flagged and leave a zero column in `T`.
pub fn thin_qr(b: &Mat) -> Result<QrFactors> {
    let (s, m) = (b.rows(), b.cols());
    if s < m {
        return Err(Error::InvalidArgument(format!(
            "thin QR needs at least as many rows as columns, got {s} x {m}"
        )));
    }
    let mut r = b.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut deficient = Vec::new();
    let scale = b.norm_fro();
    for k in 0..m {
        let tail: Vec<f64> = (k..s).map(|i| r[(i, k)]).collect();
        let tail_norm = norm2(&tail);
        if tail_norm <= f64::EPSILON * scale {
            deficient.push(k);
            reflectors.push(Vec::new());
            for i in k..s {
                r[(i, k)] = 0.0;
            }
            continue;
        }
        let alpha = if tail[0] >= 0.0 { -tail_norm } else { tail_norm };
        let mut v = tail;
        v[0] -= alpha;
        let vn = norm2(&v);
        for vi in &mut v {
            *vi /= vn;
        }
        // Apply H = I - 2 v v^T to the remaining columns.
        for j in k..m {
            let mut c = 0.0;
            for i in k..s {
                c += v[i - k] * r[(i, j)];
            }
            c *= 2.0;
            for i in k..s {
                r[(i, j)] -= c * v[i - k];
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..s {
            r[(i, k)] = 0.0;
        }
        reflectors.push(v);
    }
    // Materialize the thin Q = H_1 ... H_m E.
    let mut q = Mat::from_fn(s, m, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..m).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..m {
            let mut c = 0.0;
            for i in k..s {
                c += v[i - k] * q[(i, j)];
            }
            c *= 2.0;
            for i in k..s {
                q[(i, j)] -= c * v[i - k];
            }
        }
    }
    // Flip signs so the diagonal of T is nonnegative.
    for k in 0..m {
        if r[(k, k)] < 0.0 {
            for j in k..m {
                r[(k, j)] = -r[(k, j)];
            }
            for i in 0..s {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    let q_cols: Vec<Vec<f64>> = (0..m).map(|j| q.column(j)).collect();
    let t_cols: Vec<Vec<f64>> = (0..m).map(|j| (0..=j).map(|i| r[(i, j)]).collect()).collect();
    Ok(QrFactors { s_rows: s, q_cols, t_cols, deficient })
}

/// Incremental Householder QR of a tall matrix whose columns arrive one at a
/// time. Unlike Gram-Schmidt, the implicit Q keeps full orthonormality even
/// when the pushed columns become numerically dependent.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    n: usize,
    /// Unit reflector vectors; entry k is empty for a skipped (dependent) column.
    reflectors: Vec<Vec<f64>>,
    /// Column j holds the raw, unsigned T[0..=j, j].
    t_cols: Vec<Vec<f64>>,
    signs: Vec<f64>,
}

impl IncrementalQr {
    pub fn new(n: usize) -> Self {
        Self { n, reflectors: Vec::new(), t_cols: Vec::new(), signs: Vec::new() }
    }

    pub fn num_cols(&self) -> usize {
        self.t_cols.len()
    }

    /// Appends a column; returns the new (nonnegative) diagonal entry of `T`.
    pub fn push_column(&mut self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.n);
        let k = self.num_cols();
        let mut y = u.to_vec();
        for v in &self.reflectors {
            if v.is_empty() {
                continue;
            }
            let offset = self.n - v.len();
            let mut c = 0.0;
            for i in 0..v.len() {
                c += v[i] * y[offset + i];
            }
            c *= 2.0;
            for i in 0..v.len() {
                y[offset + i] -= c * v[i];
            }
        }
        let mut t_col: Vec<f64> = y[..k].to_vec();
        let tail = &y[k..];
        let tail_norm = norm2(tail);
        let alpha = if tail_norm == 0.0 {
            self.reflectors.push(Vec::new());
            0.0
        } else {
            let alpha = if tail[0] >= 0.0 { -tail_norm } else { tail_norm };
            let mut v = tail.to_vec();
            v[0] -= alpha;
            let vn = norm2(&v);
            for vi in &mut v {
                *vi /= vn;
            }
            self.reflectors.push(v);
            alpha
        };
        t_col.push(alpha);
        self.t_cols.push(t_col);
        self.signs.push(if alpha < 0.0 { -1.0 } else { 1.0 });
        self.tau(k)
    }

    pub fn t_entry(&self, i: usize, j: usize) -> f64 {
        if i > j {
            0.0
        } else {
            self.signs[i] * self.t_cols[j][i]
        }
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.t_entry(j, j)
    }

    /// Leading m x m block of `T` (with nonnegative diagonal).
    pub fn t_leading(&self, m: usize) -> Mat {
        Mat::from_fn(m, m, |i, j| self.t_entry(i, j))
    }

    /// The j-th column of the implicit orthonormal factor.
    pub fn q_col(&self, j: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        y[j] = self.signs[j];
        for k in (0..=j).rev() {
            let v = &self.reflectors[k];
            if v.is_empty() {
                continue;
            }
            let offset = self.n - v.len();
            let mut c = 0.0;
            for i in 0..v.len() {
                c += v[i] * y[offset + i];
            }
            c *= 2.0;
            for i in 0..v.len() {
                y[offset + i] -= c * v[i];
            }
        }
        y
    }

    /// Materializes the leading m columns of Q as a matrix.
    pub fn q_leading(&self, m: usize) -> Mat {
        let cols: Vec<Vec<f64>> = (0..m).map(|j| self.q_col(j)).collect();
        Mat::from_columns(&cols)
    }
}
