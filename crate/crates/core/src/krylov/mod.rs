//! The truncated (or full) Arnoldi process and the sketched quantities that
//! ride along with it: the incrementally maintained thin QR of the sketched
//! basis, the rank-one modification vector `r`, the whitened reduced matrix,
//! and analysis-only comparisons against a fully orthonormal basis of the
//! same Krylov space.

use crate::dense::qr::{IncrementalQr, QrFactors};
use crate::dense::{axpy, dot, norm2, singular_values, Mat};
use crate::error::{Error, Result};
use crate::sketch::{estimate_epsilon, Embedding};
use crate::sparse::SparseMatrix;

/// Orthogonalization window of the Arnoldi process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Orthogonalize against all previous basis vectors.
    Full,
    /// Orthogonalize against the last `k` basis vectors only (`k >= 1`).
    Window(usize),
}

impl Truncation {
    fn window_start(&self, step: usize) -> usize {
        match *self {
            Truncation::Full => 0,
            Truncation::Window(k) => step.saturating_sub(k),
        }
    }
}

/// Growing Krylov basis `U_{d+1}` with the banded Hessenberg `H` underline.
///
/// After `d` completed steps the basis holds `d+1` columns (or `d` columns if
/// the iteration ended in a happy breakdown at step `d`).
#[derive(Debug, Clone)]
pub struct ArnoldiState {
    u_cols: Vec<Vec<f64>>,
    /// Column `j` holds `H[0..=j+1, j]` (length `j + 2`); entries outside the
    /// truncation window are exact zeros.
    h_cols: Vec<Vec<f64>>,
    trunc: Truncation,
    beta: f64,
    a_norm_est: f64,
    breakdown: Option<usize>,
    last_product: Option<Vec<f64>>,
}

impl ArnoldiState {
    pub fn new(a: &SparseMatrix, b: &[f64], trunc: Truncation) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::InvalidArgument("Krylov iteration needs a square matrix".into()));
        }
        if a.n_cols() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {} x {}, b has length {}",
                a.n_rows(),
                a.n_cols(),
                b.len()
            )));
        }
        if let Truncation::Window(0) = trunc {
            return Err(Error::InvalidArgument("truncation window must be at least 1".into()));
        }
        let beta = norm2(b);
        if beta == 0.0 {
            return Err(Error::InvalidArgument("starting vector is zero".into()));
        }
        let u1: Vec<f64> = b.iter().map(|v| v / beta).collect();
        Ok(Self {
            u_cols: vec![u1],
            h_cols: Vec::new(),
            trunc,
            beta,
            a_norm_est: a.norm_est(),
            breakdown: None,
            last_product: None,
        })
    }

    /// Number of completed steps `d`.
    pub fn steps(&self) -> usize {
        self.h_cols.len()
    }

    pub fn basis_len(&self) -> usize {
        self.u_cols.len()
    }

    pub fn basis_col(&self, j: usize) -> &[f64] {
        &self.u_cols[j]
    }

    pub fn ambient_dim(&self) -> usize {
        self.u_cols[0].len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn breakdown(&self) -> Option<usize> {
        self.breakdown
    }

    pub fn operator_norm_est(&self) -> f64 {
        self.a_norm_est
    }

    /// Raw product `A u_d` of the most recent step, before orthogonalization.
    pub fn last_product(&self) -> Option<&[f64]> {
        self.last_product.as_deref()
    }

    /// `h_{j+1, j}` (1-based), the subdiagonal entry produced at step `j`.
    pub fn subdiag(&self, j: usize) -> f64 {
        self.h_cols[j][j + 1]
    }

    pub fn h_entry(&self, i: usize, j: usize) -> f64 {
        if i > j + 1 {
            0.0
        } else {
            self.h_cols[j].get(i).copied().unwrap_or(0.0)
        }
    }

    /// The square `d x d` reduced matrix `H_d`.
    pub fn h_square(&self, d: usize) -> Mat {
        Mat::from_fn(d, d, |i, j| self.h_entry(i, j))
    }

    /// The rectangular `(d+1) x d` reduced matrix.
    pub fn h_underline(&self, d: usize) -> Mat {
        Mat::from_fn(d + 1, d, |i, j| self.h_entry(i, j))
    }

    /// `U_d y` (linear combination of the first `d` basis columns).
    pub fn basis_matvec(&self, d: usize, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), d);
        let mut out = vec![0.0; self.ambient_dim()];
        for j in 0..d {
            axpy(y[j], &self.u_cols[j], &mut out);
        }
        out
    }

    /// One Arnoldi step: `w = A u_d`, modified Gram-Schmidt against the
    /// window with one reorthogonalization pass, then normalization. On happy
    /// breakdown the state records the step and refuses further ones.
    pub fn step(&mut self, a: &SparseMatrix) -> Result<()> {
        if let Some(step) = self.breakdown {
            return Err(Error::AfterBreakdown { step });
        }
        let d = self.h_cols.len();
        let u_last = &self.u_cols[d];
        let mut w = a.apply_vec(u_last);
        self.last_product = Some(w.clone());
        let start = self.trunc.window_start(d + 1);
        let mut h_col = vec![0.0; d + 2];
        for _pass in 0..2 {
            for j in start..=d {
                let c = dot(&self.u_cols[j], &w);
                axpy(-c, &self.u_cols[j], &mut w);
                h_col[j] += c;
            }
        }
        let h_next = norm2(&w);
        h_col[d + 1] = h_next;
        self.h_cols.push(h_col);
        if h_next <= 1e-14 * self.a_norm_est {
            self.breakdown = Some(d + 1);
            return Ok(());
        }
        for v in &mut w {
            *v /= h_next;
        }
        self.u_cols.push(w);
        Ok(())
    }

    /// Residual of the Arnoldi relation for column `j`,
    /// `||A u_j - U h_j|| / ||A||`.
    pub fn relation_residual(&self, a: &SparseMatrix, j: usize) -> f64 {
        let mut r = a.apply_vec(&self.u_cols[j]);
        for i in 0..(j + 2).min(self.u_cols.len()) {
            axpy(-self.h_entry(i, j), &self.u_cols[i], &mut r);
        }
        norm2(&r) / self.a_norm_est.max(f64::MIN_POSITIVE)
    }
}

/// Sketched companion of an [`ArnoldiState`]: the thin QR of `S U`, the
/// rank-one vector `r = h_{d+1,d} T_d^{-1} t`, and the whitened reduced
/// matrix `H_hat = T_d H_d T_d^{-1}` with its modification `t_hat`.
#[derive(Debug)]
pub struct SketchState {
    embedding: Embedding,
    qr: QrFactors,
    /// Honestly sketched products `S (A u_j)`, one per completed step.
    sau_cols: Vec<Vec<f64>>,
    sb: Vec<f64>,
    r: Vec<f64>,
    t_hat: Vec<f64>,
    h_hat: Mat,
    steps: usize,
    dependence_flag: bool,
}

impl SketchState {
    /// Builds the sketch companion for a fresh (0-step) Arnoldi state.
    pub fn new(embedding: Embedding, arnoldi: &ArnoldiState) -> Result<Self> {
        if arnoldi.steps() != 0 {
            return Err(Error::StateMismatch(
                "sketch companion must be created before the first step".into(),
            ));
        }
        if embedding.ambient_dim() != arnoldi.ambient_dim() {
            return Err(Error::DimensionMismatch(format!(
                "embedding expects dimension {}, basis has {}",
                embedding.ambient_dim(),
                arnoldi.ambient_dim()
            )));
        }
        let su1 = embedding.apply(arnoldi.basis_col(0))?;
        let mut qr = QrFactors::empty(embedding.sketch_rows());
        qr.append_column(&su1);
        let sb: Vec<f64> = su1.iter().map(|v| v * arnoldi.beta()).collect();
        Ok(Self {
            embedding,
            qr,
            sau_cols: Vec::new(),
            sb,
            r: Vec::new(),
            t_hat: Vec::new(),
            h_hat: Mat::zeros(0, 0),
            steps: 0,
            dependence_flag: false,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn qr(&self) -> &QrFactors {
        &self.qr
    }

    /// `r = h_{d+1,d} T_d^{-1} t` at the current step count.
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// `t_hat = (h_{d+1,d} / tau_d) t`.
    pub fn t_hat(&self) -> &[f64] {
        &self.t_hat
    }

    /// `H_hat = T_d H_d T_d^{-1}` (exactly upper Hessenberg by construction).
    pub fn h_hat(&self) -> &Mat {
        &self.h_hat
    }

    /// `tau_{d+1}`, the most recent diagonal entry of `T`.
    pub fn tau_last(&self) -> f64 {
        self.qr.tau(self.qr.num_cols() - 1)
    }

    pub fn sb(&self) -> &[f64] {
        &self.sb
    }

    pub fn sau_col(&self, j: usize) -> &[f64] {
        &self.sau_cols[j]
    }

    /// Raised once `tau_{d+1} <= 1e-14`: the sketched basis has (numerically)
    /// stopped growing and the final attainable accuracy may be limited.
    pub fn dependence_flag(&self) -> bool {
        self.dependence_flag
    }

    /// Advances the sketch companion by the one step the Arnoldi state is
    /// ahead of it. Computes the new column of the QR of `S U`, the vector
    /// `r` (fresh triangular solve), and the whitened quantities.
    pub fn step(&mut self, arnoldi: &ArnoldiState) -> Result<()> {
        if arnoldi.steps() != self.steps + 1 {
            return Err(Error::StateMismatch(format!(
                "basis has {} completed steps, sketch companion has {}",
                arnoldi.steps(),
                self.steps
            )));
        }
        let d = self.steps + 1;
        let product = arnoldi
            .last_product()
            .ok_or_else(|| Error::StateMismatch("missing last Arnoldi product".into()))?;
        self.sau_cols.push(self.embedding.apply(product)?);
        let broke_down = arnoldi.breakdown() == Some(d);
        if !broke_down {
            let su_new = self.embedding.apply(arnoldi.basis_col(d))?;
            let outcome = self.qr.append_column(&su_new);
            if outcome.tau <= 1e-14 {
                self.dependence_flag = true;
            }
        }
        let h_next = arnoldi.subdiag(d - 1);
        // t is the top of the newest column of T; on breakdown there is no
        // new column and the rank-one correction vanishes with h_{d+1,d}.
        let t: Vec<f64> = if broke_down {
            vec![0.0; d]
        } else {
            (0..d).map(|i| self.qr.t_entry(i, d)).collect()
        };
        let x = self.qr.t_solve(d, &t);
        self.r = x.iter().map(|v| v * h_next).collect();
        let tau_d = self.qr.tau(d - 1);
        let scale = if tau_d == 0.0 { 0.0 } else { h_next / tau_d };
        self.t_hat = t.iter().map(|v| v * scale).collect();
        let h_d = arnoldi.h_square(d);
        let th = self.qr.t_matmul(d, &h_d);
        self.h_hat = self.qr.t_solve_right(d, &th);
        self.steps = d;
        Ok(())
    }

    /// `S A U_d` from the honestly sketched per-step products.
    pub fn sau_mat(&self) -> Mat {
        Mat::from_columns(&self.sau_cols)
    }

    /// Relative residual of the sketched Arnoldi relation
    /// `S A U_d = S U_d (H_d + r e_d^T) + tau_{d+1} h_{d+1,d} q e_d^T`,
    /// with `S A U_d` measured by sketching the actual products `A u_j`.
    pub fn sketched_relation_residual(&self, arnoldi: &ArnoldiState) -> f64 {
        let d = self.steps;
        let s_rows = self.qr.num_rows();
        let sau = self.sau_mat();
        let mut resid = sau.clone();
        // minus S U_d (H_d + r e_d^T); S U_d = Q_d T_d.
        let mut h_mod = arnoldi.h_square(d);
        for i in 0..d {
            h_mod[(i, d - 1)] += self.r[i];
        }
        for j in 0..d {
            let col = h_mod.column(j);
            // T_d * col
            let mut tcol = vec![0.0; d];
            for i in 0..d {
                let mut acc = 0.0;
                for k in i..d {
                    acc += self.qr.t_entry(i, k) * col[k];
                }
                tcol[i] = acc;
            }
            let su_col = self.qr.q_matvec(d, &tcol);
            for i in 0..s_rows {
                resid[(i, j)] -= su_col[i];
            }
        }
        if self.qr.num_cols() > d {
            let coeff = self.qr.tau(d) * arnoldi.subdiag(d - 1);
            let q = self.qr.q_col(d);
            for i in 0..s_rows {
                resid[(i, d - 1)] -= coeff * q[i];
            }
        }
        resid.norm_fro() / sau.norm_fro().max(f64::MIN_POSITIVE)
    }

    /// Relative residual of the whitened-sketched relation
    /// `S A U_d T_d^{-1} = Q_d (H_hat + t_hat e_d^T)
    ///                     + (tau_{d+1}/tau_d) h_{d+1,d} q e_d^T`.
    pub fn whitened_relation_residual(&self, arnoldi: &ArnoldiState) -> f64 {
        let d = self.steps;
        let s_rows = self.qr.num_rows();
        let lhs = self.qr.t_solve_right(d, &self.sau_mat());
        let mut resid = lhs.clone();
        let mut h_mod = self.h_hat.clone();
        for i in 0..d {
            h_mod[(i, d - 1)] += self.t_hat[i];
        }
        for j in 0..d {
            let qh = self.qr.q_matvec(d, &h_mod.column(j));
            for i in 0..s_rows {
                resid[(i, j)] -= qh[i];
            }
        }
        if self.qr.num_cols() > d {
            let tau_d = self.qr.tau(d - 1);
            let coeff = if tau_d == 0.0 {
                0.0
            } else {
                self.qr.tau(d) / tau_d * arnoldi.subdiag(d - 1)
            };
            let q = self.qr.q_col(d);
            for i in 0..s_rows {
                resid[(i, d - 1)] -= coeff * q[i];
            }
        }
        resid.norm_fro() / lhs.norm_fro().max(f64::MIN_POSITIVE)
    }
}

/// Measured condition number of the whitened basis `U_d T_d^{-1}` together
/// with the embedding-quality bound `sqrt((1+eps)/(1-eps))`.
#[derive(Debug, Clone, Copy)]
pub struct WhitenedCondition {
    pub kappa: f64,
    pub epsilon_hat: f64,
    pub bound: f64,
}

/// Computes `kappa_2(U_d T_d^{-1})` by explicit formation and singular
/// values, plus the bound from the measured embedding distortion of the
/// Krylov space (estimated on an orthonormalized copy of `U_d`).
pub fn whitened_basis_condition(
    arnoldi: &ArnoldiState,
    sketch: &SketchState,
) -> Result<WhitenedCondition> {
    let d = sketch.steps();
    if d == 0 {
        return Err(Error::InvalidArgument("no completed steps".into()));
    }
    let n = arnoldi.ambient_dim();
    // W = U_d T_d^{-1}, column by column.
    let mut w_cols = Vec::with_capacity(d);
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let x = sketch.qr().t_solve(d, &e);
        w_cols.push(arnoldi.basis_matvec(d, &x));
    }
    let sv = singular_values(&Mat::from_columns(&w_cols));
    let kappa = match (sv.first(), sv.last()) {
        (Some(&mx), Some(&mn)) if mn > 0.0 => mx / mn,
        _ => f64::INFINITY,
    };
    let mut inc = IncrementalQr::new(n);
    for j in 0..d {
        inc.push_column(arnoldi.basis_col(j));
    }
    let epsilon_hat = estimate_epsilon(sketch.embedding(), &inc.q_leading(d))?;
    let bound = if epsilon_hat < 1.0 {
        ((1.0 + epsilon_hat) / (1.0 - epsilon_hat)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(WhitenedCondition { kappa, epsilon_hat, bound })
}

/// Analysis-only comparison of the truncated basis against a fully
/// orthonormal basis of the same space, obtained by Householder QR of
/// `U_{d+1}` (exact span equality in floating point).
#[derive(Debug)]
pub struct OrthoComparison {
    /// `curly T_{d+1}` with `U_{d+1} = curly U_{d+1} curly T_{d+1}`.
    pub curly_t: Mat,
    /// Rank-one vector relating the sketched to the full approximation.
    pub r_hat: Vec<f64>,
    /// Rank-one vector relating the truncated to the full approximation,
    /// `v = -h_{d+1,d} curly_t_column`.
    pub v_trunc: Vec<f64>,
    /// Right-hand side of the a-priori estimate
    /// `h_{d+1,d} |tau_{d+1}/tau_d| sqrt((1+eps)/(1-eps))` for `||r_hat||`.
    pub r_hat_bound: f64,
    pub epsilon_hat: f64,
    /// `|tau_{d+1}/tau_d|` of the orthonormalizing factor (logged, not
    /// asserted; ~1 while the space keeps growing).
    pub tau_ratio: f64,
    ortho: IncrementalQr,
    d: usize,
}

impl OrthoComparison {
    /// The orthonormal basis columns `curly U_d`.
    pub fn ortho_basis(&self, d: usize) -> Mat {
        self.ortho.q_leading(d)
    }

    /// The fully orthonormal reduced matrix `curly H_d`, recovered from
    /// `curly T_{d+1} H_underline_d curly T_d^{-1}`.
    pub fn curly_h_square(&self, arnoldi: &ArnoldiState) -> Mat {
        let d = self.d;
        let hu = arnoldi.h_underline(d);
        let prod = self.curly_t.matmul(&hu);
        let td = self.curly_t.submatrix(0, d, 0, d);
        let full = solve_right_upper(&prod, &td);
        full.submatrix(0, d, 0, d)
    }
}

/// `lhs * T^{-1}` for upper triangular `T`, by forward column substitution.
pub fn solve_right_upper(lhs: &Mat, t: &Mat) -> Mat {
    let m = t.rows();
    assert_eq!(lhs.cols(), m);
    let guard = f64::EPSILON * (0..m).map(|i| t[(i, i)].abs()).fold(0.0, f64::max);
    let mut x = Mat::zeros(lhs.rows(), m);
    for j in 0..m {
        let mut col = lhs.column(j);
        for k in 0..j {
            let tkj = t[(k, j)];
            if tkj != 0.0 {
                for i in 0..lhs.rows() {
                    col[i] -= x[(i, k)] * tkj;
                }
            }
        }
        let mut piv = t[(j, j)];
        if piv == 0.0 {
            piv = guard.max(f64::MIN_POSITIVE);
        }
        for (i, v) in col.iter().enumerate() {
            x[(i, j)] = v / piv;
        }
    }
    x
}

/// Builds the orthogonal-basis comparison quantities at the sketch state's
/// current step count. Needs the not-yet-broken-down basis column `u_{d+1}`.
pub fn ortho_comparison(arnoldi: &ArnoldiState, sketch: &SketchState) -> Result<OrthoComparison> {
    let d = sketch.steps();
    if d == 0 {
        return Err(Error::InvalidArgument("no completed steps".into()));
    }
    if arnoldi.basis_len() < d + 1 {
        return Err(Error::InvalidArgument(
            "orthogonal comparison needs the basis to extend one column past d".into(),
        ));
    }
    let n = arnoldi.ambient_dim();
    let mut inc = IncrementalQr::new(n);
    for j in 0..=d {
        inc.push_column(arnoldi.basis_col(j));
        let tau = inc.tau(j);
        if j < d && tau <= 1e-14 {
            return Err(Error::DegenerateBasis { index: j + 1, tau });
        }
    }
    let curly_t = inc.t_leading(d + 1);
    let h_next = arnoldi.subdiag(d - 1);
    let tau_hat_d = curly_t[(d - 1, d - 1)];
    let tau_hat_next = curly_t[(d, d)];
    let curly_t_col: Vec<f64> = (0..d).map(|i| curly_t[(i, d)]).collect();
    // x = T_d^{-1} t from the sketched QR; r_hat = (curlyT_d x - t_col) h / tau_hat_d.
    let t: Vec<f64> = (0..d).map(|i| sketch.qr().t_entry(i, d)).collect();
    let x = sketch.qr().t_solve(d, &t);
    let mut r_hat = vec![0.0; d];
    for i in 0..d {
        let mut acc = 0.0;
        for k in i..d {
            acc += curly_t[(i, k)] * x[k];
        }
        r_hat[i] = (acc - curly_t_col[i]) * h_next / tau_hat_d;
    }
    let v_trunc: Vec<f64> = curly_t_col.iter().map(|v| -h_next * v).collect();
    let epsilon_hat = estimate_epsilon(sketch.embedding(), &inc.q_leading(d + 1))?;
    let tau_ratio = (tau_hat_next / tau_hat_d).abs();
    let r_hat_bound = if epsilon_hat < 1.0 {
        h_next * tau_ratio * ((1.0 + epsilon_hat) / (1.0 - epsilon_hat)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(OrthoComparison {
        curly_t,
        r_hat,
        v_trunc,
        r_hat_bound,
        epsilon_hat,
        tau_ratio,
        ortho: inc,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::hessenberg_eig;
    use crate::sketch::{make_embedding, EmbeddingKind};
    use crate::sparse::{gen_condiff, SparseMatrix};
    use num_complex::Complex64;

    fn run_chain(
        a: &SparseMatrix,
        b: &[f64],
        trunc: Truncation,
        kind: EmbeddingKind,
        s: usize,
        seed: u64,
        steps: usize,
    ) -> (ArnoldiState, SketchState) {
        let mut arnoldi = ArnoldiState::new(a, b, trunc).unwrap();
        let emb = make_embedding(kind, s, a.n_cols(), seed).unwrap();
        let mut sketch = SketchState::new(emb, &arnoldi).unwrap();
        for _ in 0..steps {
            arnoldi.step(a).unwrap();
            sketch.step(&arnoldi).unwrap();
            if arnoldi.breakdown().is_some() {
                break;
            }
        }
        (arnoldi, sketch)
    }

    fn ones_b(n: usize) -> Vec<f64> {
        let v = vec![1.0; n];
        let nv = norm2(&v);
        v.into_iter().map(|x| x / nv).collect()
    }

    #[test]
    fn eigenvector_start_breaks_down_immediately() {
        // A diagonal, b = e1 is an eigenvector.
        let a = SparseMatrix::from_triplets(4, 4, (0..4).map(|i| (i, i, (i + 2) as f64))).unwrap();
        let mut b = vec![0.0; 4];
        b[0] = 1.0;
        let mut st = ArnoldiState::new(&a, &b, Truncation::Full).unwrap();
        st.step(&a).unwrap();
        assert_eq!(st.breakdown(), Some(1));
        assert_eq!(st.h_square(1)[(0, 0)], 2.0);
        assert!(st.step(&a).is_err());
    }

    #[test]
    fn full_mode_keeps_basis_orthonormal() {
        let a = gen_condiff(20, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let mut st = ArnoldiState::new(&a, &b, Truncation::Full).unwrap();
        for _ in 0..30 {
            st.step(&a).unwrap();
        }
        let u = Mat::from_columns(&(0..31).map(|j| st.basis_col(j).to_vec()).collect::<Vec<_>>());
        let mut g = u.transpose().matmul(&u);
        g.shift_diagonal(-1.0);
        assert!(g.max_abs() <= 1e-12, "orthogonality defect {}", g.max_abs());
    }

    #[test]
    fn relation_residual_small_in_both_modes() {
        let a = gen_condiff(15, 5e-2).unwrap();
        let b = ones_b(a.n_rows());
        for trunc in [Truncation::Full, Truncation::Window(2)] {
            let mut st = ArnoldiState::new(&a, &b, trunc).unwrap();
            for _ in 0..25 {
                st.step(&a).unwrap();
            }
            for j in 0..25 {
                let res = st.relation_residual(&a, j);
                assert!(res <= 1e-12, "column {j}: residual {res} ({trunc:?})");
            }
            for j in 0..st.basis_len() {
                assert!((norm2(st.basis_col(j)) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn truncation_matches_full_while_window_covers() {
        let a = gen_condiff(10, 1e-1).unwrap();
        let b = ones_b(a.n_rows());
        let k = 4;
        let mut full = ArnoldiState::new(&a, &b, Truncation::Full).unwrap();
        let mut trunc = ArnoldiState::new(&a, &b, Truncation::Window(k)).unwrap();
        for _ in 0..k {
            full.step(&a).unwrap();
            trunc.step(&a).unwrap();
        }
        // While d <= k every step orthogonalized against the whole history.
        let hf = full.h_underline(k);
        let ht = trunc.h_underline(k);
        assert!(hf.sub(&ht).max_abs() <= 1e-12);
        for j in 0..=k {
            let diff: f64 = full
                .basis_col(j)
                .iter()
                .zip(trunc.basis_col(j))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-12);
        }
    }

    #[test]
    fn truncated_equals_full_when_window_exceeds_steps() {
        let a = gen_condiff(10, 1e-1).unwrap();
        let b = ones_b(a.n_rows());
        let d = 20;
        let mut full = ArnoldiState::new(&a, &b, Truncation::Full).unwrap();
        let mut wide = ArnoldiState::new(&a, &b, Truncation::Window(d + 5)).unwrap();
        for _ in 0..d {
            full.step(&a).unwrap();
            wide.step(&a).unwrap();
        }
        assert!(full.h_underline(d).sub(&wide.h_underline(d)).max_abs() <= 1e-12);
    }

    #[test]
    fn sketched_relation_residual_is_tiny() {
        let a = gen_condiff(20, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let (arnoldi, sketch) =
            run_chain(&a, &b, Truncation::Window(2), EmbeddingKind::SparseSign, 120, 3, 30);
        let res = sketch.sketched_relation_residual(&arnoldi);
        assert!(res <= 1e-10, "relation residual {res}");
        let wres = sketch.whitened_relation_residual(&arnoldi);
        assert!(wres <= 1e-10, "whitened residual {wres}");
    }

    #[test]
    fn isometric_sketch_of_orthonormal_basis_gives_tiny_r() {
        let a = gen_condiff(12, 1e-1).unwrap();
        let n = a.n_rows();
        let b = ones_b(n);
        let (arnoldi, sketch) = run_chain(&a, &b, Truncation::Full, EmbeddingKind::Srdct, n, 7, 20);
        let r = sketch.r();
        let h_next = arnoldi.subdiag(sketch.steps() - 1);
        assert!(norm2(r) <= 1e-10 * h_next, "||r|| = {} vs h = {h_next}", norm2(r));
    }

    #[test]
    fn q_is_orthogonal_to_sketched_basis() {
        let a = gen_condiff(15, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let (_, sketch) =
            run_chain(&a, &b, Truncation::Window(2), EmbeddingKind::SparseSign, 100, 11, 25);
        let d = sketch.steps();
        let q_new = sketch.qr().q_col(d).to_vec();
        for j in 0..d {
            let ip = dot(sketch.qr().q_col(j), &q_new).abs();
            assert!(ip <= 1e-11, "component {j}: {ip}");
        }
    }

    #[test]
    fn eigenvalues_of_modified_pairs_match() {
        // eig(H_d + r e_d^T) equals eig(H_hat + t_hat e_d^T) as multisets.
        let a = gen_condiff(15, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let (arnoldi, sketch) =
            run_chain(&a, &b, Truncation::Window(2), EmbeddingKind::Gaussian, 80, 5, 20);
        let d = sketch.steps();
        let mut m1 = arnoldi.h_square(d);
        for i in 0..d {
            m1[(i, d - 1)] += sketch.r()[i];
        }
        let mut m2 = sketch.h_hat().clone();
        for i in 0..d {
            m2[(i, d - 1)] += sketch.t_hat()[i];
        }
        let e1 = hessenberg_eig(&m1).unwrap();
        let e2 = hessenberg_eig(&m2).unwrap();
        let mut l1 = e1.lambdas;
        let mut l2 = e2.lambdas;
        let key = |a: &Complex64, b: &Complex64| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap();
        l1.sort_by(|x, y| key(x, y));
        l2.sort_by(|x, y| key(x, y));
        let scale = m1.norm_fro();
        for (x, y) in l1.iter().zip(&l2) {
            assert!((x - y).norm() <= 1e-8 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn whitened_basis_condition_respects_bound() {
        let a = gen_condiff(20, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let mut arnoldi = ArnoldiState::new(&a, &b, Truncation::Window(2)).unwrap();
        let emb = make_embedding(EmbeddingKind::SparseSign, 4 * 41, a.n_cols(), 13).unwrap();
        let mut sketch = SketchState::new(emb, &arnoldi).unwrap();
        for _ in 0..40 {
            arnoldi.step(&a).unwrap();
            sketch.step(&arnoldi).unwrap();
        }
        let wc = whitened_basis_condition(&arnoldi, &sketch).unwrap();
        assert!(wc.epsilon_hat < 1.0, "eps = {}", wc.epsilon_hat);
        assert!(wc.kappa <= wc.bound, "kappa {} above bound {}", wc.kappa, wc.bound);
    }

    #[test]
    fn whitened_condition_is_one_for_isometric_sketch() {
        let a = gen_condiff(12, 1e-1).unwrap();
        let n = a.n_rows();
        let b = ones_b(n);
        let (arnoldi, sketch) = run_chain(&a, &b, Truncation::Full, EmbeddingKind::Srdct, n, 17, 15);
        let wc = whitened_basis_condition(&arnoldi, &sketch).unwrap();
        assert!((wc.kappa - 1.0).abs() <= 1e-10, "kappa = {}", wc.kappa);
    }

    #[test]
    fn bound_value_at_half_sqrt_two_distortion() {
        // eps = 1/sqrt(2) gives sqrt((1+eps)/(1-eps)) = 1 + sqrt(2).
        let eps = 1.0 / 2.0f64.sqrt();
        let bound = ((1.0 + eps) / (1.0 - eps)).sqrt();
        assert!((bound - (1.0 + 2.0f64.sqrt())).abs() < 1e-12);
        assert!((bound - 2.4142).abs() < 1e-4);
    }

    #[test]
    fn ortho_comparison_trivial_for_full_mode() {
        let a = gen_condiff(12, 1e-1).unwrap();
        let b = ones_b(a.n_rows());
        let (arnoldi, sketch) =
            run_chain(&a, &b, Truncation::Full, EmbeddingKind::SparseSign, 80, 19, 15);
        let oc = ortho_comparison(&arnoldi, &sketch).unwrap();
        let d = sketch.steps();
        // curly T = I for an already orthonormal basis; the truncation
        // vector vanishes.
        let mut t = oc.curly_t.clone();
        t.shift_diagonal(-1.0);
        assert!(t.max_abs() <= 1e-12, "curly T defect {}", t.max_abs());
        assert!(norm2(&oc.v_trunc) <= 1e-12 * arnoldi.subdiag(d - 1).max(1.0));
        assert_eq!(oc.curly_t[(0, 0)], 1.0);
    }

    #[test]
    fn r_hat_stays_below_its_bound_along_the_run() {
        let a = gen_condiff(20, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let mut arnoldi = ArnoldiState::new(&a, &b, Truncation::Window(2)).unwrap();
        let emb = make_embedding(EmbeddingKind::SparseSign, 124, a.n_cols(), 23).unwrap();
        let mut sketch = SketchState::new(emb, &arnoldi).unwrap();
        for _ in 0..30 {
            arnoldi.step(&a).unwrap();
            sketch.step(&arnoldi).unwrap();
            let oc = ortho_comparison(&arnoldi, &sketch).unwrap();
            assert!(
                norm2(&oc.r_hat) <= oc.r_hat_bound * (1.0 + 1e-10),
                "step {}: ||r_hat|| = {} above bound {}",
                sketch.steps(),
                norm2(&oc.r_hat),
                oc.r_hat_bound
            );
        }
    }

    #[test]
    fn reconstruction_through_curly_t() {
        // U_{d+1} = curly U_{d+1} curly T_{d+1} to high accuracy.
        let a = gen_condiff(15, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let (arnoldi, sketch) =
            run_chain(&a, &b, Truncation::Window(2), EmbeddingKind::SparseSign, 90, 29, 20);
        let oc = ortho_comparison(&arnoldi, &sketch).unwrap();
        let d = sketch.steps();
        let u = Mat::from_columns(&(0..=d).map(|j| arnoldi.basis_col(j).to_vec()).collect::<Vec<_>>());
        let rec = oc.ortho_basis(d + 1).matmul(&oc.curly_t);
        assert!(rec.sub(&u).max_abs() <= 1e-11, "defect {}", rec.sub(&u).max_abs());
    }
}
