//! Field-of-values boundary points and convex-region distance queries.
//!
//! For each angle theta, the rightmost point of `e^{i theta} F(M)` is the top
//! eigenvalue of the Hermitian part of `e^{i theta} M`; the Rayleigh quotient
//! of its eigenvector traces the boundary of `F(M)`.

use num_complex::Complex64;

use super::{cdotc, cnorm2, CMat, Mat};
use crate::error::{Error, Result};

/// Boundary points of the field of values of a real square matrix, at angles
/// `theta_j = 2 pi j / n_angles`, returned in angle order.
pub fn fov_boundary(m: &Mat, n_angles: usize) -> Result<Vec<Complex64>> {
    if n_angles < 8 {
        return Err(Error::InvalidArgument("need at least 8 angles".into()));
    }
    if !m.is_square() {
        return Err(Error::InvalidArgument("field of values needs a square matrix".into()));
    }
    let n = m.rows();
    let mc = m.to_complex();
    let mut pts = Vec::with_capacity(n_angles);
    for j in 0..n_angles {
        let theta = 2.0 * std::f64::consts::PI * (j as f64) / (n_angles as f64);
        let phase = Complex64::new(0.0, theta).exp();
        // Hermitian part of e^{i theta} M.
        let mut herm = CMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let v = phase * mc[(r, c)] + (phase * mc[(c, r)]).conj();
                herm[(r, c)] = 0.5 * v;
            }
        }
        let (_, x) = hermitian_max_eig(&herm);
        let mx = mc.matvec(&x);
        let num = cdotc(&x, &mx);
        let den = cdotc(&x, &x).re;
        pts.push(num / den);
    }
    Ok(pts)
}

/// Largest eigenvalue and eigenvector of a complex Hermitian matrix by
/// Lanczos with full reorthogonalization (exact at `m = n` steps).
pub fn hermitian_max_eig(b: &CMat) -> (f64, Vec<Complex64>) {
    let n = b.rows();
    let scale = b.norm_fro().max(f64::MIN_POSITIVE);
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(1.0 + 0.41 * ((j * 53 % 31) as f64) / 31.0, 0.17 * ((j * 17 % 13) as f64) / 13.0))
        .collect();
    let nv = cnorm2(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let max_steps = n.min(200);
    for step in 0..max_steps {
        q.push(v.clone());
        let mut w = b.matvec(&v);
        let alpha = cdotc(&v, &w).re;
        alphas.push(alpha);
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for qi in &q {
                let c = cdotc(qi, &w);
                for (wv, qv) in w.iter_mut().zip(qi) {
                    *wv -= c * qv;
                }
            }
        }
        let beta = cnorm2(&w);
        if beta <= 1e-14 * scale || step + 1 == max_steps {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|z| *z /= beta);
        v = w;
    }
    // Top eigenpair of the real symmetric tridiagonal via Jacobi.
    let m = alphas.len();
    let mut t = Mat::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let (vals, vecs) = sym_eig_jacobi(&t);
    let mut top = 0;
    for i in 1..m {
        if vals[i] > vals[top] {
            top = i;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (i, qi) in q.iter().enumerate() {
        let w = vecs[(i, top)];
        for (xv, qv) in x.iter_mut().zip(qi) {
            *xv += w * qv;
        }
    }
    let nx = cnorm2(&x);
    x.iter_mut().for_each(|z| *z /= nx);
    (vals[top], x)
}

/// Cyclic Jacobi eigensolver for small real symmetric matrices.
/// Returns eigenvalues (unsorted) and the orthogonal eigenvector matrix.
fn sym_eig_jacobi(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(m[(i, j)].abs());
            }
        }
        if off <= 1e-15 * m.norm_fro().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

/// Convex hull of a point cloud in the plane, with distance queries. Used for
/// `dist(lambda, F(M))` when grading eigenvalue outliers.
#[derive(Debug, Clone)]
pub struct ConvexRegion {
    /// Hull vertices in counterclockwise order (may degenerate to 1-2 points).
    hull: Vec<(f64, f64)>,
}

impl ConvexRegion {
    pub fn from_points(pts: &[Complex64]) -> Self {
        let mut p: Vec<(f64, f64)> = pts.iter().map(|z| (z.re, z.im)).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p.dedup();
        if p.len() <= 2 {
            return Self { hull: p };
        }
        // Andrew's monotone chain.
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
            (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
        };
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for &pt in &p {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], pt) <= 0.0 {
                lower.pop();
            }
            lower.push(pt);
        }
        let mut upper: Vec<(f64, f64)> = Vec::new();
        for &pt in p.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], pt) <= 0.0 {
                upper.pop();
            }
            upper.push(pt);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        if lower.is_empty() {
            // All points collinear; keep the extremes.
            lower = vec![p[0], p[p.len() - 1]];
        }
        Self { hull: lower }
    }

    pub fn vertices(&self) -> Vec<Complex64> {
        self.hull.iter().map(|&(x, y)| Complex64::new(x, y)).collect()
    }

    pub fn centroid(&self) -> Complex64 {
        let k = self.hull.len().max(1) as f64;
        let (sx, sy) = self.hull.iter().fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
        Complex64::new(sx / k, sy / k)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.distance(z) == 0.0
    }

    /// Euclidean distance from `z` to the region (0 inside).
    pub fn distance(&self, z: Complex64) -> f64 {
        let p = (z.re, z.im);
        match self.hull.len() {
            0 => f64::INFINITY,
            1 => dist2(p, self.hull[0]).sqrt(),
            2 => dist_segment(p, self.hull[0], self.hull[1]),
            _ => {
                let mut inside = true;
                let mut best = f64::INFINITY;
                let k = self.hull.len();
                for i in 0..k {
                    let a = self.hull[i];
                    let b = self.hull[(i + 1) % k];
                    let cr = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                    if cr < 0.0 {
                        inside = false;
                    }
                    best = best.min(dist_segment(p, a, b));
                }
                if inside {
                    0.0
                } else {
                    best
                }
            }
        }
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)
}

fn dist_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let denom = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if denom == 0.0 { 0.0 } else { ((ap.0 * ab.0 + ap.1 * ab.1) / denom).clamp(0.0, 1.0) };
    let proj = (a.0 + t * ab.0, a.1 + t * ab.1);
    dist2(p, proj).sqrt()
}
