//! The f(A)b approximants (full, truncated, sketched FOM in its several
//! formulations) and the rank-one-update diagnostics relating them: the
//! spectral error vector `g_w(M) w`, its divided-difference routes, factorial
//! bounds, eigenvalue-outlier grading, and eigenvector growth profiles.

use num_complex::Complex64;

use crate::dense::funm::matrix_function;
use crate::dense::lu::ShiftedHessenbergSolver;
use crate::dense::{
    expm, expm_via_schur, fov_boundary, funm_eig, hessenberg_eig, norm2, ConvexRegion, Mat,
};
use crate::dense::divdiff::divided_difference_table;
use crate::error::{Error, Result};
use crate::func::AnalyticFn;
use crate::krylov::{ortho_comparison, ArnoldiState, SketchState, Truncation};
use crate::sketch::Embedding;
use crate::sparse::SparseMatrix;

/// Number of support angles used when a field-of-values polygon is needed.
const FOV_ANGLES: usize = 64;

/// Membership threshold for the effective eigenvalue set: `|beta_i|` must
/// exceed `BETA_RTOL * max_j |beta_j|`.
pub const BETA_RTOL: f64 = 1e-10;

/// The approximation family a value was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Fom,
    TrFom,
    SfomPinv,
    SfomRankOneExpm,
    SfomRankOneSchur,
    SfomWhitened,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Fom => "fom",
            Variant::TrFom => "trfom",
            Variant::SfomPinv => "sfom_pinv",
            Variant::SfomRankOneExpm => "sfom_rankone_expm",
            Variant::SfomRankOneSchur => "sfom_rankone_schur",
            Variant::SfomWhitened => "sfom_whitened",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fom" => Ok(Variant::Fom),
            "trfom" => Ok(Variant::TrFom),
            "sfom_pinv" | "sfom-pinv" => Ok(Variant::SfomPinv),
            "sfom_rankone_expm" | "sfom-rankone-expm" => Ok(Variant::SfomRankOneExpm),
            "sfom_rankone_schur" | "sfom-rankone-schur" => Ok(Variant::SfomRankOneSchur),
            "sfom_whitened" | "sfom-whitened" => Ok(Variant::SfomWhitened),
            other => Err(Error::InvalidArgument(format!("unknown variant '{other}'"))),
        }
    }
}

/// Sketched formulations of the same underlying approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfomFormulation {
    /// `f((S U_d)^+ S A U_d) (S U_d)^+ S b` with the pseudoinverse realized
    /// through the QR factors.
    Pinv,
    /// `U_d f(H_d + r e_d^T) e_1 ||b||` with the exponential evaluated by
    /// scaling and squaring directly.
    RankOneExpm,
    /// Same, but the exponential goes through the real Schur form.
    RankOneSchur,
    /// `U_d T_d^{-1} f(H_hat + t_hat e_d^T) e_1 ||S b||`, back-substituting
    /// with `T_d` (never forming its inverse).
    Whitened,
}

impl SfomFormulation {
    pub fn variant(&self) -> Variant {
        match self {
            SfomFormulation::Pinv => Variant::SfomPinv,
            SfomFormulation::RankOneExpm => Variant::SfomRankOneExpm,
            SfomFormulation::RankOneSchur => Variant::SfomRankOneSchur,
            SfomFormulation::Whitened => Variant::SfomWhitened,
        }
    }
}

/// One extracted approximation to `f(A) b`.
#[derive(Debug, Clone)]
pub struct Approximant {
    pub variant: Variant,
    pub d: usize,
    /// Coefficients in the (truncated or orthonormal) basis `U_d`.
    pub y: Vec<f64>,
    pub value: Vec<f64>,
    /// Identifies the `(A, b)` instance the approximant belongs to.
    pub fingerprint: u64,
    /// Set when the sketched QR showed (near-)rank-deficiency; the final
    /// attainable accuracy may be limited.
    pub rank_warning: bool,
}

/// FNV-1a over the quantities of the first Arnoldi step; identical for any
/// two states built from the same `(A, b)` pair.
pub fn state_fingerprint(arnoldi: &ArnoldiState) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |x: u64| {
        h ^= x;
        h = h.wrapping_mul(0x100000001b3);
    };
    eat(arnoldi.ambient_dim() as u64);
    eat(arnoldi.beta().to_bits());
    let u1 = arnoldi.basis_col(0);
    let stride = (u1.len() / 64).max(1);
    for i in (0..u1.len()).step_by(stride) {
        eat(u1[i].to_bits());
    }
    if arnoldi.steps() > 0 {
        eat(arnoldi.h_entry(0, 0).to_bits());
        eat(arnoldi.h_entry(1, 0).to_bits());
    }
    h
}

fn f_times_e1(m: &Mat, f: &dyn AnalyticFn, algo: SmallFunAlgo) -> Result<Vec<f64>> {
    let fm = match (algo, f.exp_scale()) {
        (SmallFunAlgo::ExpmViaSchur, Some(a)) => expm_via_schur(&m.scale(a))?,
        (SmallFunAlgo::ExpmDirect, Some(a)) => expm(&m.scale(a))?,
        (SmallFunAlgo::Auto, Some(a)) => expm(&m.scale(a))?,
        (_, None) => funm_eig(m, f)?,
    };
    Ok(fm.column(0))
}

/// How the small-matrix function evaluation is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallFunAlgo {
    /// Exponentials by direct scaling-and-squaring, other functions by
    /// eigendecomposition.
    Auto,
    ExpmDirect,
    ExpmViaSchur,
}

/// `U_d f(H_d) e_1 ||b||` from an existing Arnoldi state at its current step
/// count (full or truncated; the caller picks the state).
pub fn projected_value(
    arnoldi: &ArnoldiState,
    f: &dyn AnalyticFn,
    variant: Variant,
) -> Result<Approximant> {
    let d = arnoldi.steps();
    if d == 0 {
        return Err(Error::InvalidArgument("no completed steps".into()));
    }
    let h = arnoldi.h_square(d);
    let mut y = f_times_e1(&h, f, SmallFunAlgo::Auto)?;
    for v in &mut y {
        *v *= arnoldi.beta();
    }
    let value = arnoldi.basis_matvec(d, &y);
    Ok(Approximant {
        variant,
        d,
        y,
        value,
        fingerprint: state_fingerprint(arnoldi),
        rank_warning: false,
    })
}

/// Evaluates one sketched formulation at the chain's current step count.
pub fn sfom_value(
    arnoldi: &ArnoldiState,
    sketch: &SketchState,
    f: &dyn AnalyticFn,
    formulation: SfomFormulation,
) -> Result<Approximant> {
    let d = sketch.steps();
    if d == 0 {
        return Err(Error::InvalidArgument("no completed steps".into()));
    }
    if arnoldi.steps() != d {
        return Err(Error::StateMismatch(format!(
            "basis at step {}, sketch companion at step {d}",
            arnoldi.steps()
        )));
    }
    let qr = sketch.qr();
    let rank_warning = sketch.dependence_flag() || !qr.deficient_columns().is_empty();
    let y = match formulation {
        SfomFormulation::Pinv => {
            // G = T_d^{-1} Q_d^T (S A U_d), rhs = T_d^{-1} Q_d^T S b.
            let sau = sketch.sau_mat();
            let mut g = Mat::zeros(d, d);
            for j in 0..d {
                let col = qr.t_solve(d, &qr.q_tr_matvec(d, &sau.column(j)));
                g.set_column(j, &col);
            }
            let rhs = qr.t_solve(d, &qr.q_tr_matvec(d, sketch.sb()));
            let fg = match f.exp_scale() {
                Some(a) => expm(&g.scale(a))?,
                None => funm_eig(&g, f)?,
            };
            fg.matvec(&rhs)
        }
        SfomFormulation::RankOneExpm | SfomFormulation::RankOneSchur => {
            let mut m = arnoldi.h_square(d);
            for i in 0..d {
                m[(i, d - 1)] += sketch.r()[i];
            }
            let algo = if formulation == SfomFormulation::RankOneExpm {
                SmallFunAlgo::ExpmDirect
            } else {
                SmallFunAlgo::ExpmViaSchur
            };
            let mut y = f_times_e1(&m, f, algo)?;
            for v in &mut y {
                *v *= arnoldi.beta();
            }
            y
        }
        SfomFormulation::Whitened => {
            let mut m = sketch.h_hat().clone();
            for i in 0..d {
                m[(i, d - 1)] += sketch.t_hat()[i];
            }
            let mut y_hat = f_times_e1(&m, f, SmallFunAlgo::Auto)?;
            let sb_norm = norm2(sketch.sb());
            for v in &mut y_hat {
                *v *= sb_norm;
            }
            qr.t_solve(d, &y_hat)
        }
    };
    let value = arnoldi.basis_matvec(d, &y);
    Ok(Approximant {
        variant: formulation.variant(),
        d,
        y,
        value,
        fingerprint: state_fingerprint(arnoldi),
        rank_warning,
    })
}

/// Full-orthogonal FOM approximation of `f(A) b` at dimension `d` (or at the
/// happy-breakdown step, whichever comes first).
pub fn fom_approx(a: &SparseMatrix, b: &[f64], d: usize, f: &dyn AnalyticFn) -> Result<Approximant> {
    let mut st = ArnoldiState::new(a, b, Truncation::Full)?;
    for _ in 0..d {
        st.step(a)?;
        if st.breakdown().is_some() {
            break;
        }
    }
    projected_value(&st, f, Variant::Fom)
}

/// Truncated FOM approximation with orthogonalization window `k`.
pub fn trfom_approx(
    a: &SparseMatrix,
    b: &[f64],
    d: usize,
    k: usize,
    f: &dyn AnalyticFn,
) -> Result<Approximant> {
    let mut st = ArnoldiState::new(a, b, Truncation::Window(k))?;
    for _ in 0..d {
        st.step(a)?;
        if st.breakdown().is_some() {
            break;
        }
    }
    projected_value(&st, f, Variant::TrFom)
}

/// Sketched FOM approximation in the requested formulation.
pub fn sfom_approx(
    a: &SparseMatrix,
    b: &[f64],
    d: usize,
    k: usize,
    f: &dyn AnalyticFn,
    embedding: Embedding,
    formulation: SfomFormulation,
) -> Result<Approximant> {
    let mut st = ArnoldiState::new(a, b, Truncation::Window(k))?;
    let mut sk = SketchState::new(embedding, &st)?;
    for _ in 0..d {
        st.step(a)?;
        sk.step(&st)?;
        if st.breakdown().is_some() {
            break;
        }
    }
    sfom_value(&st, &sk, f, formulation)
}

/// Full diagnostics for the rank-one modification `M -> M + w e_d^T` of an
/// upper Hessenberg matrix.
#[derive(Debug, Clone)]
pub struct RankOneReport {
    pub w: Vec<f64>,
    /// Eigenvalues of `M + w e_d^T`.
    pub lambdas: Vec<Complex64>,
    /// `alpha_i = e_d^T X e_i`.
    pub alphas: Vec<Complex64>,
    /// `beta_i = e_i^T X^{-1} e_1`.
    pub betas: Vec<Complex64>,
    /// `g_w(M) w = sum_i alpha_i beta_i f[M, lambda_i] w` (conjugate pairs
    /// combine to a real vector).
    pub gw_w: Vec<f64>,
    /// Same sum restricted to the effective set.
    pub gw_w_effective: Vec<f64>,
    /// Product of the subdiagonal entries of `M` (may overflow for large d;
    /// see `log_abs_m_d`).
    pub m_d: f64,
    pub log_abs_m_d: f64,
    pub sign_m_d: f64,
    /// Partial-fraction route `m_d sum_i f[M, lambda_i] w / omega'(lambda_i)`;
    /// only for simple spectra.
    pub partial_fraction_route: Option<Vec<f64>>,
    /// Divided-difference route `m_d f[M, lambda_1..lambda_d] w`, evaluated as
    /// the scalar function `h(z) = f[z, lambda_1..lambda_d]` applied to `M`
    /// through its eigendecomposition; only for simple spectra.
    pub divided_difference_route: Option<Vec<f64>>,
    pub simple_spectrum: bool,
    /// `(1 + sqrt 2) |m_d| / d! * max_D |f^(d)| * ||w||` over a disc covering
    /// the field of values of `M` and all nodes.
    pub bound: f64,
    /// Same bound with the disc shrunk to the effective eigenvalues only
    /// (reported, never asserted: its constant is heuristic).
    pub bound_effective: f64,
    /// Indices whose `beta` is not tiny.
    pub effective_set: Vec<usize>,
    /// Largest distance of an effective eigenvalue from the field of values.
    pub delta: f64,
    /// `dist(lambda_i, F(M)) / ||M||` for every eigenvalue.
    pub gammas: Vec<f64>,
    /// Boundary polygon of `F(M)` used for the distances.
    pub fov_points: Vec<Complex64>,
    /// Eigensolver flagged a (numerically) defective spectrum.
    pub defect_warning: bool,
}

fn to_complex_vec(w: &[f64]) -> Vec<Complex64> {
    w.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Drops the imaginary parts after checking they are negligible relative to
/// the result scale or to `abs_floor` (the rounding level of the summation).
fn real_part_checked(v: &[Complex64], context: &str, abs_floor: f64) -> Result<Vec<f64>> {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let imag = v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-6 * scale && imag > abs_floor {
        return Err(Error::InvalidArgument(format!(
            "{context}: imaginary residue {imag:.3e} vs scale {scale:.3e}"
        )));
    }
    Ok(v.iter().map(|z| z.re).collect())
}

fn ln_factorial(d: usize) -> f64 {
    (1..=d).map(|k| (k as f64).ln()).sum()
}

/// Diagnostics for `f(M + w e_d^T) e_1 - f(M) e_1` on an upper Hessenberg `M`.
pub fn rank_one_report(m: &Mat, w: &[f64], f: &dyn AnalyticFn) -> Result<RankOneReport> {
    let d = m.rows();
    assert_eq!(w.len(), d, "modification vector length");
    let mut m_mod = m.clone();
    for i in 0..d {
        m_mod[(i, d - 1)] += w[i];
    }
    let eig = hessenberg_eig(&m_mod)?;
    let lambdas = eig.lambdas.clone();
    let alphas: Vec<Complex64> = (0..d).map(|i| eig.alpha(i)).collect();
    let mut betas: Vec<Complex64> = (0..d).map(|i| eig.beta(i)).collect();
    // Conjugate pairs carry exactly conjugate coefficients; enforcing this on
    // the betas makes the imaginary parts of the sums cancel exactly.
    for i in 1..d {
        if lambdas[i].im != 0.0 && lambdas[i] == lambdas[i - 1].conj() {
            betas[i] = betas[i - 1].conj();
        }
    }

    // f(M) once; resolvent solves give f[M, lambda_i] w per node.
    let fm = matrix_function(m, f)?.to_complex();
    let wc = to_complex_vec(w);
    let mut terms: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    for i in 0..d {
        if i > 0 && lambdas[i].im != 0.0 && lambdas[i] == lambdas[i - 1].conj() {
            let prev: Vec<Complex64> = terms[i - 1].iter().map(|z| z.conj()).collect();
            terms.push(prev);
            continue;
        }
        let solver = ShiftedHessenbergSolver::new(m, lambdas[i]);
        let z = solver.solve(&wc);
        let fz = fm.matvec(&z);
        let flam = f.eval(lambdas[i]);
        terms.push(fz.iter().zip(&z).map(|(a, b)| a - flam * b).collect());
    }

    let max_beta = betas.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let effective_set: Vec<usize> =
        (0..d).filter(|&i| betas[i].norm() > BETA_RTOL * max_beta).collect();

    let mut gw = vec![Complex64::new(0.0, 0.0); d];
    let mut gw_eff = vec![Complex64::new(0.0, 0.0); d];
    let mut term_scale = 0.0f64;
    for i in 0..d {
        let coeff = alphas[i] * betas[i];
        let eff = effective_set.contains(&i);
        let mut contrib = 0.0f64;
        for (k, t) in terms[i].iter().enumerate() {
            let v = coeff * t;
            contrib += v.norm_sqr();
            gw[k] += v;
            if eff {
                gw_eff[k] += v;
            }
        }
        term_scale = term_scale.max(contrib.sqrt());
    }
    let sum_floor = 64.0 * f64::EPSILON * term_scale * d as f64;
    let gw_w = real_part_checked(&gw, "g_w(M) w", sum_floor)?;
    let gw_w_effective: Vec<f64> = gw_eff.iter().map(|z| z.re).collect();

    // Subdiagonal product, also kept in log form for bound evaluation.
    let mut m_d = 1.0f64;
    let mut log_abs_m_d = 0.0f64;
    let mut sign_m_d = 1.0f64;
    for j in 0..d.saturating_sub(1) {
        let e = m[(j + 1, j)];
        m_d *= e;
        log_abs_m_d += e.abs().max(f64::MIN_POSITIVE).ln();
        if e < 0.0 {
            sign_m_d = -sign_m_d;
        } else if e == 0.0 {
            sign_m_d = 0.0;
        }
    }

    let lam_scale = lambdas.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut simple_spectrum = true;
    'outer: for i in 0..d {
        for j in i + 1..d {
            if (lambdas[i] - lambdas[j]).norm() <= 1e-10 * lam_scale.max(1.0) {
                simple_spectrum = false;
                break 'outer;
            }
        }
    }

    let partial_fraction_route = if simple_spectrum {
        let mut acc = vec![Complex64::new(0.0, 0.0); d];
        let mut ok = true;
        for i in 0..d {
            // m_d / omega'(lambda_i) in log-magnitude/argument form.
            let mut log_mag = log_abs_m_d;
            let mut arg = if sign_m_d < 0.0 { std::f64::consts::PI } else { 0.0 };
            for j in 0..d {
                if j != i {
                    let diff = lambdas[i] - lambdas[j];
                    log_mag -= diff.norm().ln();
                    arg -= diff.arg();
                }
            }
            let weight = Complex64::from_polar(log_mag.exp(), arg);
            if !weight.re.is_finite() || !weight.im.is_finite() {
                ok = false;
                break;
            }
            for (k, t) in terms[i].iter().enumerate() {
                acc[k] += weight * t;
            }
        }
        if ok {
            real_part_checked(&acc, "partial-fraction route", sum_floor).ok()
        } else {
            None
        }
    } else {
        None
    };

    let divided_difference_route = if simple_spectrum {
        divided_difference_route(m, &wc, &lambdas, f, m_d, sum_floor).ok()
    } else {
        None
    };

    // Field-of-values polygon, outlier grades and the factorial bounds.
    let fov_points = fov_boundary(m, FOV_ANGLES)?;
    let hull = ConvexRegion::from_points(&fov_points);
    let m_norm = m.norm_two_est().max(f64::MIN_POSITIVE);
    let gammas: Vec<f64> = lambdas.iter().map(|&l| hull.distance(l) / m_norm).collect();
    let delta =
        effective_set.iter().map(|&i| hull.distance(lambdas[i])).fold(0.0, f64::max);

    let w_norm = norm2(w);
    let center = hull.centroid();
    let radius_all = fov_points
        .iter()
        .chain(lambdas.iter())
        .map(|z| (z - center).norm())
        .fold(0.0, f64::max);
    let bound = factorial_bound(f, center, radius_all, d, log_abs_m_d, w_norm);
    let radius_eff = fov_points
        .iter()
        .map(|z| (z - center).norm())
        .chain(effective_set.iter().map(|&i| (lambdas[i] - center).norm()))
        .fold(0.0, f64::max);
    let bound_effective = factorial_bound(f, center, radius_eff, d, log_abs_m_d, w_norm);

    Ok(RankOneReport {
        w: w.to_vec(),
        lambdas,
        alphas,
        betas,
        gw_w,
        gw_w_effective,
        m_d,
        log_abs_m_d,
        sign_m_d,
        partial_fraction_route,
        divided_difference_route,
        simple_spectrum,
        bound,
        bound_effective,
        effective_set,
        delta,
        gammas,
        fov_points,
        defect_warning: eig.defect_warning,
    })
}

fn factorial_bound(
    f: &dyn AnalyticFn,
    center: Complex64,
    radius: f64,
    d: usize,
    log_abs_m_d: f64,
    w_norm: f64,
) -> f64 {
    match f.log_max_abs_nth_derivative_on_disc(center, radius, d) {
        Some(log_max) => {
            let log_bound = (1.0 + 2.0f64.sqrt()).ln() + log_abs_m_d - ln_factorial(d)
                + log_max
                + w_norm.max(f64::MIN_POSITIVE).ln();
            log_bound.exp()
        }
        None => f64::INFINITY,
    }
}

/// `m_d * h(M) w` with `h(z) = f[z, lambda_1, ..., lambda_d]` evaluated
/// through the eigendecomposition of `M` and scalar divided-difference
/// tables; an evaluation route independent of the resolvent solves.
fn divided_difference_route(
    m: &Mat,
    wc: &[Complex64],
    lambdas: &[Complex64],
    f: &dyn AnalyticFn,
    m_d: f64,
    abs_floor: f64,
) -> Result<Vec<f64>> {
    let d = m.rows();
    let eig_m = hessenberg_eig(m)?;
    let xinv_w = eig_m.xinv.matvec(wc);
    let mut scaled = vec![Complex64::new(0.0, 0.0); d];
    for j in 0..d {
        let mut nodes = Vec::with_capacity(d + 1);
        nodes.push(eig_m.lambdas[j]);
        nodes.extend_from_slice(lambdas);
        let h = divided_difference_table(f, &nodes)?;
        scaled[j] = h * xinv_w[j];
    }
    let hw = eig_m.x.matvec(&scaled);
    let out: Vec<Complex64> = hw.iter().map(|z| z * m_d).collect();
    real_part_checked(&out, "divided-difference route", abs_floor)
}

/// `f(M + w e_d^T) e_1 - f(M) e_1` by two direct evaluations.
pub fn direct_rank_one_difference(
    m: &Mat,
    w: &[f64],
    f: &dyn AnalyticFn,
    algo: SmallFunAlgo,
) -> Result<Vec<f64>> {
    let d = m.rows();
    let mut m_mod = m.clone();
    for i in 0..d {
        m_mod[(i, d - 1)] += w[i];
    }
    let a = f_times_e1(&m_mod, f, algo)?;
    let b = f_times_e1(m, f, algo)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// The `(M, w, basis)` triple matching one of the pairwise-difference
/// identities between approximation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapKind {
    /// sketched minus full; `M = curly H_d`, `w = r_hat`, basis `curly U_d`.
    SketchedVsFull,
    /// truncated minus full; `M = curly H_d`, `w = -h_{d+1,d} t`, basis `curly U_d`.
    TruncatedVsFull,
    /// truncated minus sketched; `M = H_d`, `w = r`, basis `U_d`.
    TruncatedVsSketched,
}

#[derive(Debug)]
pub struct GapContext {
    pub kind: GapKind,
    pub m: Mat,
    pub w: Vec<f64>,
    /// `n x d` basis the difference lives in.
    pub basis: Mat,
    pub beta: f64,
}

impl GapContext {
    /// Assembles the context for a variant pair from the iteration states.
    pub fn from_states(
        kind: GapKind,
        arnoldi: &ArnoldiState,
        sketch: &SketchState,
    ) -> Result<Self> {
        let d = sketch.steps();
        let beta = arnoldi.beta();
        match kind {
            GapKind::TruncatedVsSketched => {
                let basis = Mat::from_columns(
                    &(0..d).map(|j| arnoldi.basis_col(j).to_vec()).collect::<Vec<_>>(),
                );
                Ok(Self { kind, m: arnoldi.h_square(d), w: sketch.r().to_vec(), basis, beta })
            }
            GapKind::SketchedVsFull | GapKind::TruncatedVsFull => {
                let oc = ortho_comparison(arnoldi, sketch)?;
                let m = oc.curly_h_square(arnoldi);
                let w = if kind == GapKind::SketchedVsFull {
                    oc.r_hat.clone()
                } else {
                    oc.v_trunc.clone()
                };
                Ok(Self { kind, m, w, basis: oc.ortho_basis(d), beta })
            }
        }
    }
}

#[derive(Debug)]
pub struct GapOutcome {
    pub report: RankOneReport,
    /// `||first.value - second.value||`.
    pub difference_norm: f64,
    /// `||basis g_w(M) w|| * beta`.
    pub predicted_norm: f64,
    /// `||(first - second) - basis g_w(M) w beta|| / ||basis g_w(M) w beta||`.
    pub identity_residual: f64,
}

/// Verifies the rank-one identity `first - second = basis * g_w(M) w * beta`
/// for a pair of approximants of the same problem at the same dimension.
pub fn approximation_gap(
    first: &Approximant,
    second: &Approximant,
    context: &GapContext,
    f: &dyn AnalyticFn,
) -> Result<GapOutcome> {
    if first.d != second.d {
        return Err(Error::StateMismatch(format!(
            "dimension mismatch: {} vs {}",
            first.d, second.d
        )));
    }
    if first.fingerprint != second.fingerprint {
        return Err(Error::StateMismatch("approximants belong to different problems".into()));
    }
    let report = rank_one_report(&context.m, &context.w, f)?;
    let predicted: Vec<f64> =
        context.basis.matvec(&report.gw_w).iter().map(|v| v * context.beta).collect();
    let diff: Vec<f64> = first.value.iter().zip(&second.value).map(|(a, b)| a - b).collect();
    let resid: Vec<f64> = diff.iter().zip(&predicted).map(|(a, b)| a - b).collect();
    let predicted_norm = norm2(&predicted);
    Ok(GapOutcome {
        report,
        difference_norm: norm2(&diff),
        predicted_norm,
        identity_residual: norm2(&resid) / predicted_norm.max(f64::MIN_POSITIVE),
    })
}

/// Eigenvector component growth of a modified lower Hessenberg matrix
/// `N + e_d w^T`, together with the predicting polynomial profile.
#[derive(Debug, Clone)]
pub struct GrowthProfile {
    pub lambda: Complex64,
    /// `|eta_k|`, the component magnitudes of the selected unit eigenvector.
    pub eta: Vec<f64>,
    /// `|phi_{k-1}(lambda)|`, aligned with `eta` and scaled so the last
    /// component is exactly 1.
    pub phi: Vec<f64>,
}

/// Component profile of the `index`-th eigenvector of `M = N + e_d w^T`
/// where `N` is lower Hessenberg with nonzero superdiagonal. The modified
/// row is the last one, so `N`'s diagonal and superdiagonal are read off `M`
/// directly.
pub fn eigvec_growth_profile(m_mod: &Mat, index: usize) -> Result<GrowthProfile> {
    let d = m_mod.rows();
    if !m_mod.is_square() || d < 2 {
        return Err(Error::InvalidArgument("need a square matrix of dimension >= 2".into()));
    }
    for j in 0..d - 1 {
        if m_mod[(j, j + 1)] == 0.0 {
            return Err(Error::ZeroSuperdiagonal { index: j });
        }
    }
    // Right eigenvectors of M are the (plain-transposed) rows of X^{-1} of M^T.
    let mt = m_mod.transpose();
    let eig = hessenberg_eig(&mt)?;
    let lambda = eig.lambdas[index];
    let mut y: Vec<Complex64> = (0..d).map(|k| eig.xinv[(index, k)]).collect();
    let ny = crate::dense::cnorm2(&y);
    y.iter_mut().for_each(|z| *z /= ny);
    let eta: Vec<f64> = y.iter().map(|z| z.norm()).collect();
    // log |phi_k| accumulated to avoid underflow; aligned so entry k
    // predicts eta_{k+1} (entry 0 is the empty product).
    let mut log_phi = vec![0.0f64; d];
    for k in 1..d {
        let num = (Complex64::new(m_mod[(k - 1, k - 1)], 0.0) - lambda).norm();
        let den = m_mod[(k - 1, k)].abs();
        log_phi[k] = log_phi[k - 1] + num.max(f64::MIN_POSITIVE).ln() - den.ln();
    }
    let last = log_phi[d - 1];
    let phi: Vec<f64> = log_phi.iter().map(|&lp| (lp - last).exp()).collect();
    Ok(GrowthProfile { lambda, eta, phi })
}

/// Reference ("exact") solution mode for error traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Dense evaluation of `f(A) b` (small problems).
    Dense,
    /// Long full-orthogonal FOM run with stagnation measurement.
    LongFom,
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub value: Vec<f64>,
    /// Relative movement over the last stretch of the reference iteration
    /// (0 for dense references): an upper estimate of the reference error.
    pub quality: f64,
    /// Dimension the reference was extracted at.
    pub d: usize,
}

/// Computes the error reference for convergence traces.
pub fn reference_solution(
    a: &SparseMatrix,
    b: &[f64],
    f: &dyn AnalyticFn,
    mode: ReferenceMode,
    d_max: usize,
) -> Result<Reference> {
    match mode {
        ReferenceMode::Dense => {
            let fm = matrix_function(&a.to_dense(), f)?;
            Ok(Reference { value: fm.matvec(b), quality: 0.0, d: a.n_rows() })
        }
        ReferenceMode::LongFom => {
            let d_ref = (2 * d_max).min(a.n_rows());
            let probe = d_ref.saturating_sub(50).max(1);
            let mut st = ArnoldiState::new(a, b, Truncation::Full)?;
            let mut probe_value: Option<Vec<f64>> = None;
            for step in 0..d_ref {
                st.step(a)?;
                if st.breakdown().is_some() {
                    break;
                }
                if step + 1 == probe && probe < d_ref {
                    probe_value = Some(projected_value(&st, f, Variant::Fom)?.value);
                }
            }
            let final_appr = projected_value(&st, f, Variant::Fom)?;
            let quality = match probe_value {
                Some(pv) if final_appr.d > probe => {
                    let diff: Vec<f64> =
                        pv.iter().zip(&final_appr.value).map(|(x, y)| x - y).collect();
                    norm2(&diff) / norm2(&final_appr.value).max(f64::MIN_POSITIVE)
                }
                _ => 0.0,
            };
            Ok(Reference { value: final_appr.value, quality, d: final_appr.d })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::svd::singular_values;
    use crate::func::{Polynomial, ScaledExp};
    use crate::sketch::{make_embedding, EmbeddingKind};
    use crate::sparse::{gen_condiff, gen_toeplitz};
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn random_hessenberg(rng: &mut ChaCha20Rng, d: usize) -> Mat {
        Mat::from_fn(d, d, |i, j| if i <= j + 1 { rng.gen::<f64>() * 2.0 - 1.0 } else { 0.0 })
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den = norm2(b).max(f64::MIN_POSITIVE);
        num / den
    }

    fn ones_b(n: usize) -> Vec<f64> {
        let v = vec![1.0; n];
        let nv = norm2(&v);
        v.into_iter().map(|x| x / nv).collect()
    }

    #[test]
    fn zero_modification_gives_zero_error_vector() {
        let mut rng = ChaCha20Rng::seed_from_u64(81);
        let m = random_hessenberg(&mut rng, 7);
        let w = vec![0.0; 7];
        let f = ScaledExp::exp();
        let report = rank_one_report(&m, &w, &f).unwrap();
        assert!(norm2(&report.gw_w) <= 1e-14);
        let direct = direct_rank_one_difference(&m, &w, &f, SmallFunAlgo::Auto).unwrap();
        assert!(norm2(&direct) <= 1e-14);
    }

    #[test]
    fn spectral_sum_matches_direct_difference() {
        let f = ScaledExp::exp();
        let mut rng = ChaCha20Rng::seed_from_u64(82);
        for trial in 0..20 {
            let d = 8 + (trial % 5);
            let m = random_hessenberg(&mut rng, d);
            let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let report = rank_one_report(&m, &w, &f).unwrap();
            let direct = direct_rank_one_difference(&m, &w, &f, SmallFunAlgo::Auto).unwrap();
            let err = rel_diff(&report.gw_w, &direct);
            assert!(err <= 1e-8, "trial {trial}: relative error {err}");
        }
    }

    #[test]
    fn divided_difference_routes_agree() {
        let f = ScaledExp::exp();
        let mut rng = ChaCha20Rng::seed_from_u64(83);
        for trial in 0..10 {
            let d = 6 + (trial % 5);
            let m = random_hessenberg(&mut rng, d);
            let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let report = rank_one_report(&m, &w, &f).unwrap();
            if !report.simple_spectrum {
                continue;
            }
            let pf = report.partial_fraction_route.as_ref().expect("simple spectrum");
            let dd = report.divided_difference_route.as_ref().expect("simple spectrum");
            assert!(rel_diff(pf, &report.gw_w) <= 1e-6, "pf route off by {}", rel_diff(pf, &report.gw_w));
            assert!(rel_diff(dd, &report.gw_w) <= 1e-6, "dd route off by {}", rel_diff(dd, &report.gw_w));
        }
    }

    #[test]
    fn coefficient_product_identity() {
        // alpha_i beta_i = m_d / omega'(lambda_i).
        let f = ScaledExp::exp();
        let mut rng = ChaCha20Rng::seed_from_u64(84);
        for _ in 0..10 {
            let d = 9;
            let m = random_hessenberg(&mut rng, d);
            let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let report = rank_one_report(&m, &w, &f).unwrap();
            for i in 0..d {
                let mut omega_prime = Complex64::new(1.0, 0.0);
                for j in 0..d {
                    if j != i {
                        omega_prime *= report.lambdas[i] - report.lambdas[j];
                    }
                }
                let lhs = report.alphas[i] * report.betas[i];
                let rhs = Complex64::new(report.m_d, 0.0) / omega_prime;
                assert!(
                    (lhs - rhs).norm() <= 1e-8 * rhs.norm().max(1e-300),
                    "index {i}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn fom_on_diagonal_matrix_breaks_down_exactly() {
        let a = SparseMatrix::from_triplets(5, 5, (0..5).map(|i| (i, i, (i + 1) as f64))).unwrap();
        let mut b = vec![0.0; 5];
        b[0] = 1.0;
        let f = ScaledExp::exp();
        let appr = fom_approx(&a, &b, 5, &f).unwrap();
        assert_eq!(appr.d, 1);
        assert!((appr.value[0] - 1.0f64.exp()).abs() <= 1e-13 * 1.0f64.exp());
        for i in 1..5 {
            assert_eq!(appr.value[i], 0.0);
        }
    }

    #[test]
    fn fom_at_full_dimension_matches_dense_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(85);
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.gen::<f64>() < 0.3 || i == j {
                    trip.push((i, j, rng.gen::<f64>() * 2.0 - 1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, trip).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let f = ScaledExp::exp();
        let appr = fom_approx(&a, &b, n, &f).unwrap();
        let dense = expm(&a.to_dense()).unwrap().matvec(&b);
        let err = rel_diff(&appr.value, &dense);
        assert!(err <= 1e-9, "relative error {err}");
    }

    #[test]
    fn fom_error_against_dense_reference_decays() {
        let a = gen_condiff(20, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let f = ScaledExp::neg_exp();
        let reference = reference_solution(&a, &b, &f, ReferenceMode::Dense, 0).unwrap();
        let mut last = f64::INFINITY;
        let mut errs = Vec::new();
        for d in [20, 40, 60, 80] {
            let appr = fom_approx(&a, &b, d, &f).unwrap();
            let err = rel_diff(&appr.value, &reference.value);
            errs.push(err);
            assert!(err <= last * 1.5, "error should not grow past the transient: {errs:?}");
            last = err;
        }
        assert!(*errs.last().unwrap() <= 1e-10, "final error {errs:?}");
    }

    #[test]
    fn trfom_equals_fom_for_wide_window() {
        let a = gen_condiff(12, 5e-2).unwrap();
        let b = ones_b(a.n_rows());
        let f = ScaledExp::neg_exp();
        let d = 18;
        let full = fom_approx(&a, &b, d, &f).unwrap();
        let tr = trfom_approx(&a, &b, d, d + 3, &f).unwrap();
        assert!(rel_diff(&tr.value, &full.value) <= 1e-12);
    }

    #[test]
    fn isometric_sketch_makes_all_variants_agree_with_fom() {
        let a = gen_condiff(10, 1e-1).unwrap();
        let n = a.n_rows();
        let b = ones_b(n);
        let f = ScaledExp::neg_exp();
        let d = 15;
        let full = fom_approx(&a, &b, d, &f).unwrap();
        for formulation in [
            SfomFormulation::Pinv,
            SfomFormulation::RankOneExpm,
            SfomFormulation::RankOneSchur,
            SfomFormulation::Whitened,
        ] {
            let emb = make_embedding(EmbeddingKind::Srdct, n, n, 3).unwrap();
            let appr = sfom_approx(&a, &b, d, d + 2, &f, emb, formulation).unwrap();
            let err = rel_diff(&appr.value, &full.value);
            assert!(err <= 1e-10, "{:?}: error {err}", formulation);
        }
    }

    #[test]
    fn variants_agree_in_well_conditioned_regime() {
        let a = gen_condiff(20, 1e-2).unwrap();
        let n = a.n_rows();
        let b = ones_b(n);
        let f = ScaledExp::neg_exp();
        let mut arnoldi = ArnoldiState::new(&a, &b, Truncation::Window(2)).unwrap();
        let emb = make_embedding(EmbeddingKind::SparseSign, 160, n, 5).unwrap();
        let mut sketch = SketchState::new(emb, &arnoldi).unwrap();
        for _ in 0..20 {
            arnoldi.step(&a).unwrap();
            sketch.step(&arnoldi).unwrap();
        }
        let values: Vec<Approximant> = [
            SfomFormulation::Pinv,
            SfomFormulation::RankOneExpm,
            SfomFormulation::RankOneSchur,
            SfomFormulation::Whitened,
        ]
        .iter()
        .map(|&fm| sfom_value(&arnoldi, &sketch, &f, fm).unwrap())
        .collect();
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let err = rel_diff(&values[i].value, &values[j].value);
                assert!(
                    err <= 1e-8,
                    "{:?} vs {:?}: spread {err}",
                    values[i].variant,
                    values[j].variant
                );
            }
        }
    }

    #[test]
    fn gap_identity_truncated_vs_sketched() {
        let a = gen_condiff(20, 1e-2).unwrap();
        let n = a.n_rows();
        let b = ones_b(n);
        let f = ScaledExp::neg_exp();
        let mut arnoldi = ArnoldiState::new(&a, &b, Truncation::Window(2)).unwrap();
        let emb = make_embedding(EmbeddingKind::SparseSign, 100, n, 7).unwrap();
        let mut sketch = SketchState::new(emb, &arnoldi).unwrap();
        for _ in 0..15 {
            arnoldi.step(&a).unwrap();
            sketch.step(&arnoldi).unwrap();
        }
        let tr = projected_value(&arnoldi, &f, Variant::TrFom).unwrap();
        let sk = sfom_value(&arnoldi, &sketch, &f, SfomFormulation::Whitened).unwrap();
        let ctx = GapContext::from_states(GapKind::TruncatedVsSketched, &arnoldi, &sketch).unwrap();
        let outcome = approximation_gap(&tr, &sk, &ctx, &f).unwrap();
        assert!(
            outcome.identity_residual <= 1e-7,
            "identity residual {}",
            outcome.identity_residual
        );
    }

    #[test]
    fn gap_rejects_mismatched_dimensions() {
        let a = gen_condiff(10, 1e-1).unwrap();
        let b = ones_b(a.n_rows());
        let f = ScaledExp::neg_exp();
        let x = fom_approx(&a, &b, 5, &f).unwrap();
        let y = fom_approx(&a, &b, 7, &f).unwrap();
        let ctx = GapContext {
            kind: GapKind::SketchedVsFull,
            m: Mat::identity(5),
            w: vec![0.0; 5],
            basis: Mat::identity(5),
            beta: 1.0,
        };
        assert!(approximation_gap(&x, &y, &ctx, &f).is_err());
    }

    #[test]
    fn whitened_consistency_with_orthogonal_formulation() {
        // curly U_d f(curly H_d + r_hat e_d^T) e_1 ||b|| reproduces the
        // whitened value.
        let a = gen_condiff(15, 1e-2).unwrap();
        let b = ones_b(a.n_rows());
        let f = ScaledExp::neg_exp();
        let mut arnoldi = ArnoldiState::new(&a, &b, Truncation::Window(2)).unwrap();
        let emb = make_embedding(EmbeddingKind::SparseSign, 90, a.n_cols(), 11).unwrap();
        let mut sketch = SketchState::new(emb, &arnoldi).unwrap();
        for _ in 0..15 {
            arnoldi.step(&a).unwrap();
            sketch.step(&arnoldi).unwrap();
        }
        let whitened = sfom_value(&arnoldi, &sketch, &f, SfomFormulation::Whitened).unwrap();
        let oc = crate::krylov::ortho_comparison(&arnoldi, &sketch).unwrap();
        let d = sketch.steps();
        let mut m = oc.curly_h_square(&arnoldi);
        for i in 0..d {
            m[(i, d - 1)] += oc.r_hat[i];
        }
        let mut y = f_times_e1(&m, &f, SmallFunAlgo::Auto).unwrap();
        for v in &mut y {
            *v *= arnoldi.beta();
        }
        let other = oc.ortho_basis(d).matvec(&y);
        let err = rel_diff(&other, &whitened.value);
        assert!(err <= 1e-8, "cross-formulation error {err}");
    }

    #[test]
    fn effective_set_deflation_reproduces_full_sum() {
        // A strongly modified banded matrix throws eigenvalues far out; their
        // betas collapse and dropping them must not change the error vector.
        let m = gen_toeplitz(60).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(86);
        let w: Vec<f64> = (0..60)
            .map(|i| (1.0 + i as f64) * 1e12 * (rng.gen::<f64>() - 0.5))
            .collect();
        let f = ScaledExp::exp();
        let report = rank_one_report(&m, &w, &f).unwrap();
        assert!(
            report.effective_set.len() < 60,
            "no eigenvalue was deflated (all betas significant)"
        );
        let err = rel_diff(&report.gw_w_effective, &report.gw_w);
        assert!(err <= 1e-6, "deflation changed the sum by {err}");
    }

    #[test]
    fn factorial_bound_dominates_on_banded_toeplitz() {
        let f = ScaledExp::exp();
        let mut rng = ChaCha20Rng::seed_from_u64(87);
        for d in [5usize, 10, 15] {
            let m = gen_toeplitz(d).unwrap();
            let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let report = rank_one_report(&m, &w, &f).unwrap();
            let direct = direct_rank_one_difference(&m, &w, &f, SmallFunAlgo::Auto).unwrap();
            assert!(
                report.bound >= norm2(&direct),
                "d = {d}: bound {} below true difference {}",
                report.bound,
                norm2(&direct)
            );
        }
    }

    #[test]
    fn crouzeix_bound_on_sampled_boundary() {
        // ||h(M)|| <= (1 + sqrt 2) max over F(M) of |h|, checked against the
        // sampled boundary maximum with a tiny inflation. Advisory in nature,
        // but expected to hold with plenty of slack.
        let mut rng = ChaCha20Rng::seed_from_u64(88);
        for _ in 0..5 {
            let d = 12;
            let m = Mat::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let coeffs: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let poly = Polynomial { coeffs: coeffs.clone() };
            // Horner evaluation of h(M), independent of any eigensolver.
            let mut hm = Mat::zeros(d, d);
            for &c in coeffs.iter().rev() {
                hm = hm.matmul(&m);
                hm.shift_diagonal(c);
            }
            let norm_hm = singular_values(&hm)[0];
            let pts = fov_boundary(&m, FOV_ANGLES).unwrap();
            let max_h = pts.iter().map(|&z| poly.eval(z).norm()).fold(0.0, f64::max);
            assert!(
                norm_hm <= (1.0 + 2.0f64.sqrt()) * max_h * (1.0 + 1e-6),
                "||h(M)|| = {norm_hm} vs sampled bound {max_h}"
            );
        }
    }

    #[test]
    fn growth_profile_on_companion_like_matrix() {
        // N strictly upper bidiagonal (lower Hessenberg with zero diagonal),
        // modified by alpha e_d e_1^T: eigenvector components are exactly
        // geometric with ratio lambda, so the profile is exact.
        let d = 20;
        let growth: f64 = 3.0;
        let alpha = growth.powi(d as i32);
        let mut m_mod = Mat::zeros(d, d);
        for j in 0..d - 1 {
            m_mod[(j, j + 1)] = 1.0;
        }
        m_mod[(d - 1, 0)] = alpha;
        let profile = eigvec_growth_profile(&m_mod, 0).unwrap();
        assert!((profile.lambda.norm() - growth).abs() <= 1e-8 * growth);
        // eta_1 / eta_d = growth^{-(d-1)} up to rounding.
        let ratio = profile.eta[0] / profile.eta[d - 1];
        let expected = growth.powi(-(d as i32 - 1));
        assert!(
            (ratio / expected).ln().abs() <= 0.1,
            "ratio {ratio} vs expected {expected}"
        );
        // Predicted profile tracks the components everywhere here.
        for k in 0..d {
            let (e, p) = (profile.eta[k], profile.phi[k]);
            assert!(
                (e / profile.eta[d - 1] / p).ln().abs() <= 0.7,
                "component {k}: eta {e} phi {p}"
            );
        }
        assert_eq!(profile.phi[d - 1], 1.0);
    }

    #[test]
    fn growth_profile_rejects_zero_superdiagonal() {
        let mut m = Mat::zeros(5, 5);
        m[(0, 1)] = 1.0; // (1, 2) stays zero
        m[(2, 3)] = 1.0;
        m[(3, 4)] = 1.0;
        match eigvec_growth_profile(&m, 0) {
            Err(Error::ZeroSuperdiagonal { index: 1 }) => {}
            other => panic!("expected ZeroSuperdiagonal, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn long_fom_reference_stagnates_on_small_problem() {
        let a = gen_condiff(12, 1e-1).unwrap();
        let b = ones_b(a.n_rows());
        let f = ScaledExp::neg_exp();
        let reference = reference_solution(&a, &b, &f, ReferenceMode::LongFom, 60).unwrap();
        let dense = reference_solution(&a, &b, &f, ReferenceMode::Dense, 0).unwrap();
        let err = rel_diff(&reference.value, &dense.value);
        assert!(err <= 1e-11, "long-FOM reference off by {err}");
        assert!(reference.quality <= 1e-11, "quality {}", reference.quality);
    }
}
