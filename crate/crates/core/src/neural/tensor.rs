use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Dense row-major matrix of 64-bit reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NeuralError> {
        if data.len() != rows * cols {
            return Err(NeuralError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NeuralError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NeuralError::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copy with rows in reverse order.
    pub fn reversed(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for r in self.iter_rows().rev() {
            out.extend_from_slice(r);
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            data: out,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Indices of the non-zero entries of `x`. Encoded event rows are mostly
/// one-hot, so products against them only touch these columns.
pub(crate) fn nonzeros(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `out += W x` for row-major `w` with `out.len()` rows, using only `nz`.
pub(crate) fn add_matvec_sparse(out: &mut [f64], w: &[f64], x: &[f64], nz: &[usize]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for &j in nz {
            acc += row[j] * x[j];
        }
        *o += acc;
    }
}

/// `out += W x` for dense `x`.
pub(crate) fn add_matvec(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ d` for row-major `w` with `d.len()` rows and `out.len()` cols.
pub(crate) fn add_matvec_t(out: &mut [f64], w: &[f64], d: &[f64]) {
    let cols = out.len();
    for (r, &dr) in d.iter().enumerate() {
        if dr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += wv * dr;
        }
    }
}

/// `g += d xᵀ` restricted to the columns in `nz`.
pub(crate) fn add_outer_sparse(g: &mut [f64], d: &[f64], x: &[f64], nz: &[usize]) {
    let cols = x.len();
    for (r, &dr) in d.iter().enumerate() {
        let row = &mut g[r * cols..(r + 1) * cols];
        for &j in nz {
            row[j] += dr * x[j];
        }
    }
}

/// `g += d xᵀ`.
pub(crate) fn add_outer(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &dr) in d.iter().enumerate() {
        if dr == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += dr * xv;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
