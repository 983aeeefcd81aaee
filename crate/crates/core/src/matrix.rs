//! Dense row-major `f64` matrices.
//!
//! Storage and [`Matrix::get`]/indexing are 0-based. Every API that mirrors
//! the block notation `A[i:j, k:l]` ([`BlockSpec`], selectors, masks) takes
//! 1-based inclusive bounds and converts at the boundary.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// 1-based inclusive block `[row_lo:row_hi, col_lo:col_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSpec {
    pub row_lo: usize,
    pub row_hi: usize,
    pub col_lo: usize,
    pub col_hi: usize,
}

impl BlockSpec {
    pub fn new(row_lo: usize, row_hi: usize, col_lo: usize, col_hi: usize) -> Self {
        Self {
            row_lo,
            row_hi,
            col_lo,
            col_hi,
        }
    }

    /// Single entry `(i, j)`.
    pub fn cell(i: usize, j: usize) -> Self {
        Self::new(i, i, j, j)
    }

    /// Whole `rows x cols` range.
    pub fn full(rows: usize, cols: usize) -> Self {
        Self::new(1, rows, 1, cols)
    }

    pub fn height(&self) -> usize {
        self.row_hi + 1 - self.row_lo
    }

    pub fn width(&self) -> usize {
        self.col_hi + 1 - self.col_lo
    }

    /// Checks `1 <= row_lo <= row_hi <= rows` and likewise for columns.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let ok = 1 <= self.row_lo
            && self.row_lo <= self.row_hi
            && self.row_hi <= rows
            && 1 <= self.col_lo
            && self.col_lo <= self.col_hi
            && self.col_hi <= cols;
        if ok {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                row: self.row_hi.max(self.row_lo),
                col: self.col_hi.max(self.col_lo),
                rows,
                cols,
            })
        }
    }

    /// Whether the 1-based position `(i, j)` lies inside the block.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row_lo <= i && i <= self.row_hi && self.col_lo <= j && j <= self.col_hi
    }
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes,
    /// wrong lengths and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                got: (data.len() / cols.max(1), cols),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols + 1,
                col: pos % cols + 1,
                value: data[pos],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(m * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::RaggedRows {
                    row: i + 1,
                    expected: n,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(m, n, data)
    }

    /// Column vector `len x 1`.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    /// Row vector `1 x len`.
    pub fn row(values: &[f64]) -> Result<Self> {
        Self::new(1, values.len(), values.to_vec())
    }

    /// `O_{m,n}`. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut z = Self::zeros(rows, cols);
        z.data.fill(value);
        z
    }

    /// `I_m`. Panics if `m == 0`.
    pub fn identity(m: usize) -> Self {
        let mut z = Self::zeros(m, m);
        for i in 0..m {
            z.data[i * m + i] = 1.0;
        }
        z
    }

    /// Builds from a 0-based generator `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut z = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                z.data[i * cols + j] = f(i, j);
            }
        }
        z
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

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// 0-based read.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// 0-based write.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    /// 1-based read, `A[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.get(i - 1, j - 1)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    /// 0-based column as a vector.
    pub fn col_values(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Reference product. Each entry accumulates `a[i,k] * b[k,j]` with `k`
    /// ascending from `0.0`, so results are reproducible bit for bit.
    pub fn matmul(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: b.shape(),
            });
        }
        let (m, n, p) = (self.rows, self.cols, b.cols);
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            let row = &mut out[i * p..(i + 1) * p];
            for k in 0..n {
                let a = self.data[i * n + k];
                let brow = &b.data[k * p..(k + 1) * p];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += a * bv;
                }
            }
        }
        Ok(Matrix {
            rows: m,
            cols: p,
            data: out,
        })
    }

    fn zip_with(&self, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: b.shape(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        })
    }

    pub fn try_add(&self, b: &Matrix) -> Result<Matrix> {
        self.zip_with(b, |x, y| x + y)
    }

    pub fn try_sub(&self, b: &Matrix) -> Result<Matrix> {
        self.zip_with(b, |x, y| x - y)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, b: &Matrix) -> Result<Matrix> {
        self.zip_with(b, |x, y| x * y)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|x| c * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Copy of the block `A[row_lo:row_hi, col_lo:col_hi]`.
    pub fn block_read(&self, s: &BlockSpec) -> Result<Matrix> {
        s.validate(self.rows, self.cols)?;
        Ok(Matrix::from_fn(s.height(), s.width(), |i, j| {
            self.get(s.row_lo - 1 + i, s.col_lo - 1 + j)
        }))
    }

    /// New matrix equal to `self` with the block replaced by `v`.
    pub fn block_write(&self, s: &BlockSpec, v: &Matrix) -> Result<Matrix> {
        let mut out = self.clone();
        out.set_block(s, v)?;
        Ok(out)
    }

    /// In-place block write.
    pub fn set_block(&mut self, s: &BlockSpec, v: &Matrix) -> Result<()> {
        s.validate(self.rows, self.cols)?;
        if v.shape() != (s.height(), s.width()) {
            return Err(Error::ShapeMismatch {
                expected: (s.height(), s.width()),
                got: v.shape(),
            });
        }
        for i in 0..v.rows {
            for j in 0..v.cols {
                self.set(s.row_lo - 1 + i, s.col_lo - 1 + j, v.get(i, j));
            }
        }
        Ok(())
    }

    /// Writes `v` with its top-left corner at the 1-based position `(i, j)`.
    pub fn set_block_at(&mut self, i: usize, j: usize, v: &Matrix) -> Result<()> {
        let s = BlockSpec::new(i, i + v.rows - 1, j, j + v.cols - 1);
        self.set_block(&s, v)
    }

    /// Largest absolute entry.
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, &x| acc.max(x.abs()))
    }

    /// Max-row-sum operator norm.
    pub fn norm_row_sum(&self) -> f64 {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        Ok(self.try_sub(other)?.norm_inf())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    /// Dot product of two vectors of equal length, in index order.
    pub fn dot(&self, other: &Matrix) -> Result<f64> {
        if self.data.len() != other.data.len() || (self.cols != 1 && self.rows != 1) {
            return Err(Error::DimensionMismatch {
                op: "dot",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (&a, &b)| acc + a * b))
    }

    /// Comma-separated rows, no header, shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in self.data.chunks(self.cols) {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Matrix> {
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {:?}: {e}", ln + 1, f)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    }
}

/// `I_m`.
pub fn identity(m: usize) -> Matrix {
    Matrix::identity(m)
}

/// `O_{m,n}`.
pub fn zeros(m: usize, n: usize) -> Matrix {
    Matrix::zeros(m, n)
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.hadamard(b)
}

pub fn block_read(a: &Matrix, s: &BlockSpec) -> Result<Matrix> {
    a.block_read(s)
}

pub fn block_write(a: &Matrix, s: &BlockSpec, v: &Matrix) -> Result<Matrix> {
    a.block_write(s, v)
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape errors; use the `try_*` / `matmul` methods
// where shapes come from user input.
impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("matrix addition")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("matrix subtraction")
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product")
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.map(|x| -x)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.data.chunks(self.cols) {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}
