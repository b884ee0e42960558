//! Dense row-major matrices and the handful of kernels the networks need.
//!
//! Every reduction runs in a fixed index order, so results are bitwise
//! reproducible regardless of how callers batch their work.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("matrix buffer", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::shape("matrix row", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Columns `start..end` of every row.
    pub fn column_block(&self, start: usize, end: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        Matrix {
            rows: self.rows,
            cols: end - start,
            data,
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul inner dimension", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                axpy(aik, other.row(k), o);
            }
        }
        Ok(out)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent partial sums let the compiler vectorize while keeping
    // a fixed summation order.
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let mut acc = [0.0f64; 4];
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..n {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `X Wᵀ + b` for a batch `X` (rows are samples) and weights `W` (out × in).
pub fn affine_forward(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    if x.cols != w.cols {
        return Err(Error::shape("affine input width", w.cols, x.cols));
    }
    let mut out = Matrix::zeros(x.rows, w.rows);
    for i in 0..x.rows {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for (o, (slot, bias)) in oi.iter_mut().zip(b).enumerate() {
            *slot = dot(xi, w.row(o)) + bias;
        }
    }
    Ok(out)
}

/// `dW += Gᵀ X` and `db += Σ_rows G`, for upstream gradient `G` (batch × out).
pub fn affine_param_grads(g: &Matrix, x: &Matrix, dw: &mut Matrix, db: &mut [f64]) {
    debug_assert_eq!(g.rows, x.rows);
    debug_assert_eq!(dw.rows, g.cols);
    debug_assert_eq!(dw.cols, x.cols);
    for o in 0..g.cols {
        let dwo = dw.row_mut(o);
        for r in 0..g.rows {
            let gro = g.get(r, o);
            if gro != 0.0 {
                axpy(gro, x.row(r), dwo);
            }
        }
    }
    for r in 0..g.rows {
        for (d, gv) in db.iter_mut().zip(g.row(r)) {
            *d += gv;
        }
    }
}

/// `G W`: gradient with respect to the layer input.
pub fn affine_input_grad(g: &Matrix, w: &Matrix) -> Matrix {
    debug_assert_eq!(g.cols, w.rows);
    let mut out = Matrix::zeros(g.rows, w.cols);
    for r in 0..g.rows {
        let gr = g.row(r);
        let or = out.row_mut(r);
        for (o, &gro) in gr.iter().enumerate() {
            if gro != 0.0 {
                axpy(gro, w.row(o), or);
            }
        }
    }
    out
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky
/// factorization. Returns `None` if `A` is not numerically positive definite.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return None;
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l.set(i, i, crate::math::sqrt(s));
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Some(x)
}
