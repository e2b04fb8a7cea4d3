//! Oblivious subspace embeddings `S in R^{s x n}`: Gaussian, sparse sign,
//! and a subsampled randomized discrete cosine transform. All three are pure
//! functions of `(kind, s, n, seed)`, so a sketch can be reproduced
//! bit-identically from its descriptor.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex as FftComplex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dense::{singular_values, Mat};
use crate::error::{Error, Result};

/// Number of nonzeros per column of the sparse sign embedding (capped by `s`).
pub const SPARSE_SIGN_NNZ_PER_COL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    Gaussian,
    SparseSign,
    Srdct,
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "sparse-sign" | "sparse_sign" => Ok(Self::SparseSign),
            "srdct" => Ok(Self::Srdct),
            other => Err(Error::InvalidArgument(format!("unknown embedding kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gaussian => write!(f, "gaussian"),
            Self::SparseSign => write!(f, "sparse-sign"),
            Self::Srdct => write!(f, "srdct"),
        }
    }
}

/// Serializable description of an embedding; enough to rebuild it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub kind: EmbeddingKind,
    pub s: usize,
    pub n: usize,
    pub seed: u64,
}

enum Realization {
    /// Dense s x n matrix with N(0, 1/s) entries.
    Gaussian(Mat),
    /// Per column: `zeta` distinct row indices; the sign carries 1/sqrt(zeta).
    SparseSign { rows: Vec<u32>, signs: Vec<f64>, zeta: usize },
    /// sqrt(n/s) * row-subsample . orthonormal DCT-II . random sign diagonal.
    Srdct { signs: Vec<f64>, selected_rows: Vec<usize>, fft: Arc<dyn Fft<f64>>, scale: f64 },
}

/// An oblivious subspace embedding. Immutable and reentrant after
/// construction; `apply` may be called from multiple threads.
pub struct Embedding {
    spec: EmbeddingSpec,
    realization: Realization,
}

impl std::fmt::Debug for Embedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedding").field("spec", &self.spec).finish()
    }
}

/// Builds the embedding for `(kind, s, n, seed)`; deterministic given the seed.
pub fn make_embedding(kind: EmbeddingKind, s: usize, n: usize, seed: u64) -> Result<Embedding> {
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!(
            "sketch dimension must satisfy 1 <= s <= n, got s = {s}, n = {n}"
        )));
    }
    let spec = EmbeddingSpec { kind, s, n, seed };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let realization = match kind {
        EmbeddingKind::Gaussian => {
            let std = (1.0 / s as f64).sqrt();
            let m = Mat::from_fn(s, n, |_, _| {
                let z: f64 = rng.sample(StandardNormal);
                std * z
            });
            Realization::Gaussian(m)
        }
        EmbeddingKind::SparseSign => {
            let zeta = SPARSE_SIGN_NNZ_PER_COL.min(s);
            let val = (1.0 / zeta as f64).sqrt();
            let mut rows = Vec::with_capacity(zeta * n);
            let mut signs = Vec::with_capacity(zeta * n);
            for _col in 0..n {
                let picks = rand::seq::index::sample(&mut rng, s, zeta);
                for r in picks.iter() {
                    rows.push(r as u32);
                    signs.push(if rng.gen::<bool>() { val } else { -val });
                }
            }
            Realization::SparseSign { rows, signs, zeta }
        }
        EmbeddingKind::Srdct => {
            let signs: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let selected = rand::seq::index::sample(&mut rng, n, s).into_vec();
            let fft = FftPlanner::new().plan_fft_forward(n);
            let scale = (n as f64 / s as f64).sqrt();
            Realization::Srdct { signs, selected_rows: selected, fft, scale }
        }
    };
    Ok(Embedding { spec, realization })
}

impl Embedding {
    pub fn spec(&self) -> EmbeddingSpec {
        self.spec
    }

    pub fn sketch_rows(&self) -> usize {
        self.spec.s
    }

    pub fn ambient_dim(&self) -> usize {
        self.spec.n
    }

    /// `S x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.n {
            return Err(Error::DimensionMismatch(format!(
                "embedding expects length {}, got {}",
                self.spec.n,
                x.len()
            )));
        }
        Ok(match &self.realization {
            Realization::Gaussian(m) => m.matvec(x),
            Realization::SparseSign { rows, signs, zeta } => {
                let mut y = vec![0.0; self.spec.s];
                for (col, xv) in x.iter().enumerate() {
                    if *xv == 0.0 {
                        continue;
                    }
                    let base = col * zeta;
                    for k in 0..*zeta {
                        y[rows[base + k] as usize] += signs[base + k] * xv;
                    }
                }
                y
            }
            Realization::Srdct { signs, selected_rows, fft, scale } => {
                let flipped: Vec<f64> = x.iter().zip(signs).map(|(v, s)| v * s).collect();
                let t = dct2_orthonormal(&flipped, fft.as_ref());
                selected_rows.iter().map(|&r| scale * t[r]).collect()
            }
        })
    }

    /// Materializes `S` as a dense matrix (tests and small-scale checks only).
    pub fn to_dense(&self) -> Mat {
        let mut cols = Vec::with_capacity(self.spec.n);
        for j in 0..self.spec.n {
            let mut e = vec![0.0; self.spec.n];
            e[j] = 1.0;
            cols.push(self.apply(&e).expect("length matches by construction"));
        }
        Mat::from_columns(&cols)
    }
}

/// Orthonormal DCT-II of a real vector through a complex FFT of the
/// even-odd reshuffled sequence.
fn dct2_orthonormal(x: &[f64], fft: &dyn Fft<f64>) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<FftComplex<f64>> = vec![FftComplex::new(0.0, 0.0); n];
    for j in 0..(n + 1) / 2 {
        buf[j] = FftComplex::new(x[2 * j], 0.0);
    }
    for j in 0..n / 2 {
        buf[n - 1 - j] = FftComplex::new(x[2 * j + 1], 0.0);
    }
    fft.process(&mut buf);
    let mut out = vec![0.0; n];
    let full = (2.0 / n as f64).sqrt();
    for k in 0..n {
        let angle = -std::f64::consts::PI * (k as f64) / (2.0 * n as f64);
        let tw = FftComplex::new(0.0, angle).exp();
        let v = (tw * buf[k]).re;
        out[k] = if k == 0 { v * (1.0 / n as f64).sqrt() } else { v * full };
    }
    out
}

/// Measured embedding distortion on an orthonormal basis `V` of a subspace:
/// `eps_hat = max(1 - sigma_min^2, sigma_max^2 - 1)` over the singular values
/// of `S V`. For an exact eps-embedding of range(V), `eps_hat <= eps`.
pub fn estimate_epsilon(s: &Embedding, v: &Mat) -> Result<f64> {
    if v.rows() != s.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, embedding expects {}",
            v.rows(),
            s.ambient_dim()
        )));
    }
    let mut g = v.transpose().matmul(v);
    g.shift_diagonal(-1.0);
    if g.max_abs() > 1e-10 {
        return Err(Error::InvalidArgument(
            "estimate_epsilon needs a column-orthonormal basis".into(),
        ));
    }
    let mut cols = Vec::with_capacity(v.cols());
    for j in 0..v.cols() {
        cols.push(s.apply(&v.column(j))?);
    }
    let sv = singular_values(&Mat::from_columns(&cols));
    let smax = sv.first().copied().unwrap_or(1.0);
    let smin = sv.last().copied().unwrap_or(1.0);
    Ok((1.0 - smin * smin).max(smax * smax - 1.0))
}
