//! Dense matrix substrate, ideal crossbar VMM and the conductance model.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Row-major dense real matrix. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::new",
                expected: format!("{} entries for {rows}x{cols}", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite entry at ({}, {})", pos / cols, pos % cols)));
        }
        Ok(Self { rows, cols, data })
    }

    /// Caller guarantees finite entries and a consistent length.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    op: "DenseMatrix::from_rows",
                    expected: format!("{cols} columns"),
                    found: format!("{} columns in row {i}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// `diag(values)` padded with zeros to `rows × cols`.
    pub fn from_diagonal(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() > rows.min(cols) {
            return Err(invalid("more diagonal values than min(rows, cols)"));
        }
        let mut data = vec![0.0; rows * cols];
        for (i, v) in values.iter().enumerate() {
            data[i * cols + i] = *v;
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_vec_unchecked(self.cols, self.rows, out)
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: format!("rhs with {} rows", self.cols),
                found: format!("{}x{}", rhs.rows, rhs.cols),
            });
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let dst = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(rhs.row(p)) {
                    *d += a * b;
                }
            }
        }
        Ok(Self::from_vec_unchecked(self.rows, rhs.cols, out))
    }

    fn zip_with(&self, rhs: &DenseMatrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op,
                expected: format!("{}x{}", self.rows, self.cols),
                found: format!("{}x{}", rhs.rows, rhs.cols),
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<Self> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<Self> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|x| x * s).collect())
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.cols {
            return Err(invalid(format!("cannot take {k} leading columns of {} ", self.cols)));
        }
        let mut out = Vec::with_capacity(self.rows * k);
        for i in 0..self.rows {
            out.extend_from_slice(&self.row(i)[..k]);
        }
        Ok(Self::from_vec_unchecked(self.rows, k, out))
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self::from_vec_unchecked(rows, cols, data)
    }

    /// Serializes to the shared text format: a `"m n"` header followed by
    /// `m` lines of `n` space-separated reals with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 25 + 16);
        let _ = writeln!(s, "{} {}", self.rows, self.cols);
        for i in 0..self.rows {
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{x:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Parses the shared text format. Errors carry the 1-based line number.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (rows, cols) = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                let dims: Vec<&str> = line.split_whitespace().collect();
                if dims.len() != 2 {
                    return Err(Error::Parse { line: 1, msg: format!("expected header \"m n\", got {line:?}") });
                }
                let parse_dim = |s: &str| {
                    s.parse::<usize>()
                        .ok()
                        .filter(|&d| d > 0)
                        .ok_or_else(|| Error::Parse { line: 1, msg: format!("invalid dimension {s:?}") })
                };
                (parse_dim(dims[0])?, parse_dim(dims[1])?)
            }
            None => return Err(Error::Parse { line: 1, msg: "empty input".into() }),
        };

        let mut data = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            if seen == rows {
                return Err(Error::Parse { line: lineno, msg: format!("more than {rows} data rows") });
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                let x: f64 =
                    tok.parse().map_err(|_| Error::Parse { line: lineno, msg: format!("invalid number {tok:?}") })?;
                if !x.is_finite() {
                    return Err(Error::Parse { line: lineno, msg: format!("non-finite value {tok:?}") });
                }
                data.push(x);
            }
            let got = data.len() - before;
            if got != cols {
                return Err(Error::Parse { line: lineno, msg: format!("expected {cols} columns, found {got}") });
            }
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Parse { line: seen + 2, msg: format!("expected {rows} data rows, found {seen}") });
        }
        Ok(Self::from_vec_unchecked(rows, cols, data))
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(f))
    }
}

/// Input row vector `b` (voltage-proportional inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct RowVector(Vec<f64>);

impl RowVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("row vector must have at least one entry"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(invalid("row vector entries must be finite"));
        }
        Ok(Self(entries))
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        Self(entries)
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

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    /// Squared Euclidean distance to `other`.
    pub fn distance_sq(&self, other: &RowVector) -> f64 {
        assert_eq!(self.len(), other.len(), "distance_sq: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn dot(&self, other: &RowVector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn axpby(&self, alpha: f64, other: &RowVector, beta: f64) -> RowVector {
        assert_eq!(self.len(), other.len(), "axpby: length mismatch");
        Self(self.0.iter().zip(&other.0).map(|(a, b)| alpha * a + beta * b).collect())
    }
}

/// Feedback resistance `r_T` and the per-cell mean-square conductance budget `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    r_t: f64,
    rho: f64,
}

impl DeviceParams {
    pub fn new(r_t: f64, rho: f64) -> Result<Self> {
        if !(r_t.is_finite() && r_t > 0.0) {
            return Err(invalid(format!("r_T must be positive, got {r_t}")));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { r_t, rho })
    }

    pub fn r_t(&self) -> f64 {
        self.r_t
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self { r_t: 1.0, rho: 1.0 }
    }
}

/// Noiseless crossbar product `c = b A`.
pub fn vmm_exact(b: &RowVector, a: &DenseMatrix) -> Result<RowVector> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "vmm_exact",
            expected: format!("input of length {} for a {}x{} matrix", a.rows(), a.rows(), a.cols()),
            found: format!("length {}", b.len()),
        });
    }
    Ok(RowVector(vmm_slice(b.as_slice(), a)))
}

pub(crate) fn vmm_slice(b: &[f64], a: &DenseMatrix) -> Vec<f64> {
    let mut c = vec![0.0; a.cols()];
    for (j, &bj) in b.iter().enumerate() {
        for (ck, &ajk) in c.iter_mut().zip(a.row(j)) {
            *ck += bj * ajk;
        }
    }
    c
}

/// Conductances `g = r_T · a` that realize the coefficients.
pub fn conductance_map(a: &DenseMatrix, dev: &DeviceParams) -> DenseMatrix {
    a.scale(dev.r_t())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeCheck {
    pub satisfied: bool,
    /// `Σ g²` over all cells.
    pub total: f64,
    /// `m · n · ρ`.
    pub budget: f64,
}

/// Total magnitude constraint `Σ g² ≤ m n ρ`; equality counts as satisfied.
pub fn magnitude_check(a: &DenseMatrix, dev: &DeviceParams) -> MagnitudeCheck {
    let total = conductance_map(a, dev).frobenius_norm_sq();
    let budget = (a.rows() * a.cols()) as f64 * dev.rho();
    MagnitudeCheck { satisfied: total <= budget, total, budget }
}
