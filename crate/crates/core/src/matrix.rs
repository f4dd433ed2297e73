//! Dense row-major matrices, Kronecker products and the sink
//! augmentation/restriction operators.
//!
//! Every Kronecker construction in the crate uses the same factor order:
//! factor 1 is outermost, so in a linearized multi-index the last
//! coordinate varies fastest.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default tolerance for stochasticity checks.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Largest number of entries a Kronecker construction may allocate.
pub const DEFAULT_ENTRY_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Strictest stochasticity class a square matrix satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StochKind {
    Stochastic,
    Substochastic,
    General,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape("power of a non-square matrix".into()));
        }
        let mut out = Self::identity(self.rows);
        for _ in 0..n {
            out = out.matmul(self)?;
        }
        Ok(out)
    }

    /// Row vector times matrix: `x^T A`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "left_mul length mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    /// Matrix times column vector: `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape("inverse of a non-square matrix".into()));
        }
        self.to_nalgebra()
            .lu()
            .try_inverse()
            .map(|m| Self::from_nalgebra(&m))
            .ok_or(Error::Singular("matrix inverse"))
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if !self.is_square() || b.len() != self.rows {
            return Err(Error::Shape("solve needs a square system".into()));
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        self.to_nalgebra()
            .lu()
            .solve(&rhs)
            .map(|x| x.iter().copied().collect())
            .ok_or(Error::Singular("linear solve"))
    }

    pub fn determinant(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Shape("determinant of a non-square matrix".into()));
        }
        Ok(self.to_nalgebra().lu().determinant())
    }

    /// Replaces entries in `[-tol, 0)` by zero; returns the most negative
    /// entry found below `-tol`, if any, as `(row, col, value)`.
    pub fn clamp_small_negatives(&mut self, tol: f64) -> Option<(usize, usize, f64)> {
        let mut worst: Option<(usize, usize, f64)> = None;
        for (k, v) in self.data.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v >= -tol {
                    *v = 0.0;
                } else if worst.is_none_or(|w| *v < w.2) {
                    worst = Some((k / self.cols, k % self.cols, *v));
                }
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product with the default entry cap.
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    kron_with_cap(a, b, DEFAULT_ENTRY_CAP)
}

pub fn kron_with_cap(a: &Matrix, b: &Matrix, cap: usize) -> Result<Matrix> {
    let rows = a.rows as u128 * b.rows as u128;
    let cols = a.cols as u128 * b.cols as u128;
    if rows * cols > cap as u128 {
        return Err(Error::Size {
            entries: rows * cols,
            cap,
        });
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                let dst = (i * b.rows + k) * cols + j * b.cols;
                for (d, v) in out.data[dst..dst + b.cols].iter_mut().zip(b.row(k)) {
                    *d = s * v;
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a list of factors, factor 0 outermost.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a Matrix>) -> Result<Matrix> {
    let mut acc = Matrix::identity(1);
    for f in factors {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

/// `kron(a, I_b) + kron(I_a, b)`.
pub fn kron_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::Shape("Kronecker sum needs square factors".into()));
    }
    kron(a, &Matrix::identity(b.rows))?.add(&kron(&Matrix::identity(a.rows), b)?)
}

pub fn classify(m: &Matrix, tol: f64) -> StochKind {
    if !m.is_square() || m.min_entry() < -tol {
        return StochKind::General;
    }
    let sums = m.row_sums();
    if sums.iter().all(|s| (s - 1.0).abs() <= tol) {
        StochKind::Stochastic
    } else if sums.iter().all(|s| *s <= 1.0 + tol) {
        StochKind::Substochastic
    } else {
        StochKind::General
    }
}

/// Adds an absorbing state at index 0 that collects each row's missing mass.
pub fn augment_sink(p_sub: &Matrix, tol: f64) -> Result<Matrix> {
    if !p_sub.is_square() {
        return Err(Error::Shape("augment_sink needs a square matrix".into()));
    }
    let n = p_sub.rows;
    let mut out = Matrix::zeros(n + 1, n + 1);
    out[(0, 0)] = 1.0;
    for i in 0..n {
        let row = p_sub.row(i);
        if let Some(j) = row.iter().position(|v| *v < -tol) {
            return Err(Error::NotSubstochastic {
                row: i,
                detail: format!("has negative entry {:e} in column {j}", row[j]),
            });
        }
        let sum: f64 = row.iter().sum();
        if sum > 1.0 + tol {
            return Err(Error::NotSubstochastic {
                row: i,
                detail: format!("sums to {sum}"),
            });
        }
        out[(i + 1, 0)] = (1.0 - sum).max(0.0);
        out.data[(i + 1) * (n + 1) + 1..(i + 2) * (n + 1)].copy_from_slice(row);
    }
    Ok(out)
}

/// Deletes the row and column of an absorbing sink.
pub fn restrict_sink(p: &Matrix, sink_index: usize) -> Result<Matrix> {
    if !p.is_square() {
        return Err(Error::Shape("restrict_sink needs a square matrix".into()));
    }
    let n = p.rows;
    if sink_index >= n {
        return Err(Error::Index {
            index: sink_index,
            size: n,
        });
    }
    if !is_absorbing(p, sink_index, DEFAULT_TOL) {
        return Err(Error::NotAbsorbing { index: sink_index });
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != sink_index).collect();
    let mut out = Matrix::zeros(n - 1, n - 1);
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            out[(a, b)] = p[(i, j)];
        }
    }
    Ok(out)
}

pub fn is_absorbing(p: &Matrix, i: usize, tol: f64) -> bool {
    p.row(i)
        .iter()
        .enumerate()
        .all(|(j, v)| if j == i { (v - 1.0).abs() <= tol } else { v.abs() <= tol })
}
