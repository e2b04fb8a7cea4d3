//! Compressed sparse row matrices, the test-matrix generators, and Matrix
//! Market file I/O.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::dense::Mat;
use crate::error::{Error, Result};

/// Real CSR matrix. Column indices are strictly increasing within each row
/// and no explicit duplicates are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Real vector with finite entries, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {v}")));
        }
        Ok(Self(values))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl SparseMatrix {
    /// Builds a CSR matrix from (row, col, value) triplets. Duplicate
    /// coordinates are summed; explicit zeros are kept.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r}, {c}) outside a {n_rows} x {n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("matrix entry ({r}, {c})")));
            }
            entries.push((r, c, v));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some((lr, lc, lv)) if *lr == r && *lc == c => *lv += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            col_indices.push(c);
            values.push(v);
            row_offsets[r + 1] = col_indices.len();
        }
        // Rows without entries inherit the previous offset.
        for r in 1..=n_rows {
            if row_offsets[r] < row_offsets[r - 1] {
                row_offsets[r] = row_offsets[r - 1];
            }
        }
        let m = Self { n_rows, n_cols, row_offsets, col_indices, values };
        m.validate()?;
        Ok(m)
    }

    /// Checks the CSR structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.row_offsets.len() != self.n_rows + 1 {
            return Err(Error::InvalidArgument("row_offsets length".into()));
        }
        if *self.row_offsets.last().unwrap() != self.values.len()
            || self.col_indices.len() != self.values.len()
        {
            return Err(Error::InvalidArgument("offset/value length mismatch".into()));
        }
        for w in self.row_offsets.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidArgument("row_offsets not non-decreasing".into()));
            }
        }
        for r in 0..self.n_rows {
            let row = &self.col_indices[self.row_offsets[r]..self.row_offsets[r + 1]];
            for pair in row.windows(2) {
                if pair[1] <= pair[0] {
                    return Err(Error::InvalidArgument(format!(
                        "row {r}: column indices not strictly increasing"
                    )));
                }
            }
            if row.iter().any(|&c| c >= self.n_cols) {
                return Err(Error::InvalidArgument(format!("row {r}: column out of range")));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                out.push((r, self.col_indices[k], self.values[k]));
            }
        }
        out
    }

    /// `y = A x` on raw slices with a fixed left-to-right accumulation order
    /// inside each row, so results are bit-reproducible.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols, "spmv input length");
        assert_eq!(y.len(), self.n_rows, "spmv output length");
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.apply(x, &mut y);
        y
    }

    /// `y = A^T x`.
    pub fn apply_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                y[self.col_indices[k]] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// 2-norm estimate by a few power-iteration steps on `A^T A`;
    /// deterministic start vector.
    pub fn norm_est(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            return 0.0;
        }
        let mut x: Vec<f64> = (0..self.n_cols)
            .map(|j| 1.0 + 0.3 * ((j * 61 % 37) as f64) / 37.0)
            .collect();
        let nx = crate::dense::norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut sigma = 0.0;
        for _ in 0..25 {
            let y = self.apply_vec(&x);
            let mut z = self.apply_transpose_vec(&y);
            let nz = crate::dense::norm2(&z);
            if nz == 0.0 {
                return 0.0;
            }
            z.iter_mut().for_each(|v| *v /= nz);
            let new = nz.sqrt();
            let done = (new - sigma).abs() <= 1e-6 * new;
            sigma = new;
            x = z;
            if done {
                break;
            }
        }
        sigma
    }
}

/// `y = A x` with dimension checking.
pub fn spmv(a: &SparseMatrix, x: &DenseVector) -> Result<DenseVector> {
    if a.n_cols() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {} x {}, vector has length {}",
            a.n_rows(),
            a.n_cols(),
            x.len()
        )));
    }
    Ok(DenseVector(a.apply_vec(x.as_slice())))
}

/// Centered finite-difference discretization of the convection-diffusion
/// operator `-nu * Lap(u) + w . grad(u)` on the unit square with homogeneous
/// Dirichlet boundary, `N` interior points per side (`h = 1/(N+1)`),
/// lexicographic ordering with x fastest, and recirculating wind
/// `w = (1.5 y (1 - x^2), -3 x (1 - y^2))`.
pub fn gen_condiff(n_per_side: usize, nu: f64) -> Result<SparseMatrix> {
    gen_condiff_opts(n_per_side, nu, true)
}

/// Same discretization with the wind optionally forced to zero (pure
/// diffusion), which must produce an exactly symmetric matrix. Used to verify
/// the stencil.
pub fn gen_condiff_opts(n_per_side: usize, nu: f64, with_wind: bool) -> Result<SparseMatrix> {
    if n_per_side < 3 {
        return Err(Error::InvalidArgument("need at least 3 grid points per side".into()));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument("viscosity must be positive".into()));
    }
    let n = n_per_side;
    let h = 1.0 / (n as f64 + 1.0);
    let diff = nu / (h * h);
    let dim = n * n;
    let mut row_offsets = Vec::with_capacity(dim + 1);
    let mut col_indices = Vec::with_capacity(5 * dim);
    let mut values = Vec::with_capacity(5 * dim);
    row_offsets.push(0);
    for j in 0..n {
        let y = (j as f64 + 1.0) * h;
        for i in 0..n {
            let x = (i as f64 + 1.0) * h;
            let (w1, w2) = if with_wind {
                (1.5 * y * (1.0 - x * x), -3.0 * x * (1.0 - y * y))
            } else {
                (0.0, 0.0)
            };
            let conv_x = w1 / (2.0 * h);
            let conv_y = w2 / (2.0 * h);
            let idx = j * n + i;
            if j > 0 {
                col_indices.push(idx - n);
                values.push(-diff - conv_y);
            }
            if i > 0 {
                col_indices.push(idx - 1);
                values.push(-diff - conv_x);
            }
            col_indices.push(idx);
            values.push(4.0 * diff);
            if i + 1 < n {
                col_indices.push(idx + 1);
                values.push(-diff + conv_x);
            }
            if j + 1 < n {
                col_indices.push(idx + n);
                values.push(-diff + conv_y);
            }
            row_offsets.push(col_indices.len());
        }
    }
    let m = SparseMatrix { n_rows: dim, n_cols: dim, row_offsets, col_indices, values };
    m.validate()?;
    Ok(m)
}

/// Banded Toeplitz test matrix: diagonal -4, first subdiagonal 2, first and
/// second superdiagonals 1/2.
pub fn gen_toeplitz(d: usize) -> Result<Mat> {
    if d < 4 {
        return Err(Error::InvalidArgument("Toeplitz test matrix needs dimension >= 4".into()));
    }
    Ok(Mat::from_fn(d, d, |i, j| {
        if i == j {
            -4.0
        } else if i == j + 1 {
            2.0
        } else if j == i + 1 || j == i + 2 {
            0.5
        } else {
            0.0
        }
    }))
}

/// Reads a Matrix Market coordinate file (real, general or symmetric).
/// Symmetric storage is expanded; rows come out sorted.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let err = |message: String| Error::Parse { path: path.display().to_string(), message };
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| err("empty file".into()))?
        .map_err(Error::Io)?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err("missing %%MatrixMarket matrix header".into()));
    }
    if tokens[2] != "coordinate" {
        return Err(err(format!("unsupported format '{}', only coordinate", tokens[2])));
    }
    if tokens[3] != "real" {
        return Err(err(format!("unsupported field type '{}', only real", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(format!("unsupported symmetry '{other}'"))),
    };
    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line.map_err(Error::Io)?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        size_line = Some(trimmed.to_string());
        break;
    }
    let size_line = size_line.ok_or_else(|| err("missing size line".into()))?;
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(err(format!("bad size line '{size_line}'")));
    }
    let n_rows: usize = dims[0].parse().map_err(|_| err("bad row count".into()))?;
    let n_cols: usize = dims[1].parse().map_err(|_| err("bad column count".into()))?;
    let nnz: usize = dims[2].parse().map_err(|_| err("bad nonzero count".into()))?;
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut seen = 0usize;
    for line in lines {
        let line = line.map_err(Error::Io)?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(err(format!("bad entry line '{trimmed}'")));
        }
        let r: usize = parts[0].parse().map_err(|_| err(format!("bad row index '{}'", parts[0])))?;
        let c: usize = parts[1].parse().map_err(|_| err(format!("bad column index '{}'", parts[1])))?;
        let v: f64 = parts[2].parse().map_err(|_| err(format!("bad value '{}'", parts[2])))?;
        if r == 0 || c == 0 || r > n_rows || c > n_cols {
            return Err(err(format!("entry ({r}, {c}) outside {n_rows} x {n_cols} (1-based)")));
        }
        triplets.push((r - 1, c - 1, v));
        if symmetric && r != c {
            triplets.push((c - 1, r - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(err(format!("expected {nnz} entries, found {seen}")));
    }
    SparseMatrix::from_triplets(n_rows, n_cols, triplets)
}

/// Writes a CSR matrix in Matrix Market coordinate/real/general form.
/// Values use the shortest round-trip decimal form, so a write-read cycle
/// reproduces the matrix exactly.
pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (r, c, v) in a.triplets() {
        writeln!(out, "{} {} {}", r + 1, c + 1, v)?;
    }
    Ok(())
}
