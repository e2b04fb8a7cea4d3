//! Matrix exponential by scaling and squaring with the degree-13 diagonal
//! Pade approximant, scaled according to the 1-norm threshold of the standard
//! double-precision algorithm. No balancing is applied: feeding badly
//! balanced matrices straight into this routine is exactly the use case the
//! diagnostics in this crate are meant to study ("overscaling").

use super::lu::lu_factor;
use super::{real_schur, Mat};
use crate::error::{Error, Result};

/// 1-norm threshold for the [13/13] Pade approximant in double precision.
const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(M)` for square real `M`. Exact on the zero matrix.
pub fn expm(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("expm needs a square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("expm input".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let norm1 = m.norm_one();
    let s: u32 = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let a = m.scale(0.5f64.powi(s as i32));
    let b = &PADE_13;
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let ident = Mat::identity(n);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let w1 = a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9]));
    let w2 = a6.scale(b[7]).add(&a4.scale(b[5])).add(&a2.scale(b[3])).add(&ident.scale(b[1]));
    let u = a.matmul(&a6.matmul(&w1).add(&w2));
    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let z1 = a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8]));
    let v = a6.matmul(&z1).add(&a6.scale(b[6])).add(&a4.scale(b[4])).add(&a2.scale(b[2])).add(&ident.scale(b[0]));

    let vm_u = v.sub(&u);
    let vp_u = v.add(&u);
    let mut f = lu_factor(&vm_u)
        .solve_mat(&vp_u)
        .map_err(|_| Error::InvalidArgument("singular Pade denominator in expm".into()))?;
    for _ in 0..s {
        f = f.matmul(&f);
        if !f.is_finite() {
            return Err(Error::ExpmOverflow { scaling_power: s });
        }
    }
    Ok(f)
}

/// `exp(M)` through the real Schur form: computes `M = Z R Z^T`, applies
/// [`expm`] to the quasi-triangular factor only, and transforms back.
pub fn expm_via_schur(m: &Mat) -> Result<Mat> {
    let schur = real_schur(m)?;
    let er = expm(&schur.r)?;
    Ok(schur.z.matmul(&er).matmul(&schur.z.transpose()))
}
