//! Compressed sparse column storage and the handful of kernels the solvers need.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column-compressed sparse matrix with sorted, duplicate-free row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from raw CSC arrays, checking structure.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 {
            return Err(Error::DimensionMismatch {
                what: "csc column pointer",
                expected: ncols + 1,
                found: col_ptr.len(),
            });
        }
        if row_idx.len() != values.len() || col_ptr[ncols] != row_idx.len() {
            return Err(Error::DimensionMismatch {
                what: "csc nonzeros",
                expected: col_ptr[ncols],
                found: row_idx.len(),
            });
        }
        for j in 0..ncols {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(Error::InvalidConfig("csc column pointers must be non-decreasing"));
            }
            let col = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            for (k, &i) in col.iter().enumerate() {
                if i >= nrows {
                    return Err(Error::IndexOutOfRange { row: i, col: j, nrows, ncols });
                }
                if k > 0 && col[k - 1] >= i {
                    return Err(Error::InvalidConfig("csc row indices must be strictly increasing"));
                }
            }
        }
        Ok(Self { nrows, ncols, col_ptr, row_idx, values })
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed;
    /// explicit zeros are kept so that a write/read cycle preserves structure.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; ncols + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::IndexOutOfRange { row: i, col: j, nrows, ncols });
            }
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            rows[next[j]] = i;
            vals[next[j]] = v;
            next[j] += 1;
        }

        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            scratch.extend((counts[j]..counts[j + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|&(i, _)| i);
            for &(i, v) in &scratch {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { nrows, ncols, col_ptr, row_idx, values })
    }

    /// Keeps every entry of `dense` whose magnitude exceeds `drop_tol`.
    pub fn from_dense(dense: &DMatrix<f64>, drop_tol: f64) -> Self {
        let (nrows, ncols) = dense.shape();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..ncols {
            for i in 0..nrows {
                let v = dense[(i, j)];
                if libm::fabs(v) > drop_tol {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self { nrows, ncols, col_ptr, row_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Fraction of stored entries, `nnz / (nrows * ncols)`.
    pub fn density(&self) -> f64 {
        let total = self.nrows as f64 * self.ncols as f64;
        if total == 0.0 {
            0.0
        } else {
            self.nnz() as f64 / total
        }
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |k| (self.row_idx[k], j, self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `A * x`.
    pub fn mul_vec(&self, x: &[f64]) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = DVector::zeros(self.nrows);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `A^T * x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        DVector::from_iterator(
            self.ncols,
            (0..self.ncols).map(|j| {
                let (rows, vals) = self.col(j);
                rows.iter().zip(vals).map(|(&i, &v)| v * x[i]).sum::<f64>()
            }),
        )
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                row_idx[next[i]] = j;
                values[next[i]] = v;
                next[i] += 1;
            }
        }
        CscMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr: counts,
            row_idx,
            values,
        }
    }

    /// Multiplies every entry of column `j` by `factors[j]`.
    pub fn scale_columns(&mut self, factors: &[f64]) {
        for j in 0..self.ncols {
            let f = factors[j];
            for v in &mut self.values[self.col_ptr[j]..self.col_ptr[j + 1]] {
                *v *= f;
            }
        }
    }

    /// Scales every stored value by `c`.
    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// Appends a dense column, dropping exact zeros.
    pub fn push_dense_col(&mut self, col: &[f64]) {
        debug_assert_eq!(col.len(), self.nrows);
        for (i, &v) in col.iter().enumerate() {
            if v != 0.0 {
                self.row_idx.push(i);
                self.values.push(v);
            }
        }
        self.ncols += 1;
        self.col_ptr.push(self.row_idx.len());
    }

    /// The Gram matrix `A^T A`, stored with both triangles.
    pub fn gram(&self) -> CscMatrix {
        let at = self.transpose();
        let n = self.ncols;
        let mut acc = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..n {
            pattern.clear();
            let (rows_j, vals_j) = self.col(j);
            for (&k, &akj) in rows_j.iter().zip(vals_j) {
                // row k of A is column k of A^T
                let (cols_k, vals_k) = at.col(k);
                for (&i, &aki) in cols_k.iter().zip(vals_k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        pattern.push(i);
                    }
                    acc[i] += aki * akj;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                row_idx.push(i);
                values.push(acc[i]);
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix { nrows: n, ncols: n, col_ptr, row_idx, values }
    }

    /// Returns `A + shift * I` for square `A`, inserting missing diagonal entries.
    pub fn add_diagonal(&self, shift: f64) -> CscMatrix {
        debug_assert_eq!(self.nrows, self.ncols);
        let n = self.ncols;
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(self.nnz() + n);
        let mut values = Vec::with_capacity(self.nnz() + n);
        col_ptr.push(0);
        for j in 0..n {
            let (rows, vals) = self.col(j);
            let mut placed = false;
            for (&i, &v) in rows.iter().zip(vals) {
                if !placed && i >= j {
                    if i == j {
                        row_idx.push(j);
                        values.push(v + shift);
                        placed = true;
                        continue;
                    }
                    row_idx.push(j);
                    values.push(shift);
                    placed = true;
                }
                row_idx.push(i);
                values.push(v);
            }
            if !placed {
                row_idx.push(j);
                values.push(shift);
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix { nrows: n, ncols: n, col_ptr, row_idx, values }
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for (i, j, v) in self.triplets() {
            worst = worst.max(libm::fabs(v - t.get(i, j)));
        }
        for (i, j, v) in t.triplets() {
            worst = worst.max(libm::fabs(v - self.get(i, j)));
        }
        worst
    }
}
