use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::ordering::minimum_degree;
use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;

/// Sparse factor `P F P' = L L'` under a minimum-degree permutation `P`.
/// `L` is stored column-compressed with the diagonal first in each column.
#[derive(Debug, Clone)]
pub(crate) struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCholesky {
    /// Up-looking factorization of `a + shift * I` for symmetric `a` stored
    /// with both triangles.
    pub(crate) fn factor(a: &CscMatrix, shift: f64) -> Result<Self> {
        let n = a.ncols();
        let f = a.add_diagonal(shift);
        let perm = minimum_degree(&f);
        let mut pinv = vec![0usize; n];
        for (k, &v) in perm.iter().enumerate() {
            pinv[v] = k;
        }

        // upper triangle of the permuted matrix, column by column
        let mut upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in f.triplets() {
            let (pi, pj) = (pinv[i], pinv[j]);
            if pi <= pj {
                upper[pj].push((pi, v));
            }
        }
        for col in &mut upper {
            col.sort_unstable_by_key(|&(i, _)| i);
        }

        let parent = etree(&upper);
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut x = vec![0.0; n];
        let mut mark = vec![false; n];
        let mut stack = vec![0usize; n];
        let mut path = vec![0usize; n];

        for k in 0..n {
            // nonzero pattern of row k of L, in topological order
            let mut top = n;
            mark[k] = true;
            for &(i, _) in &upper[k] {
                let mut i = i;
                let mut len = 0;
                while !mark[i] {
                    path[len] = i;
                    len += 1;
                    mark[i] = true;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    stack[top] = path[len];
                }
            }
            for &i in &stack[top..n] {
                mark[i] = false;
            }
            mark[k] = false;

            for &(i, v) in &upper[k] {
                x[i] = v;
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..n] {
                let col = &cols[i];
                let lki = x[i] / col[0].1;
                x[i] = 0.0;
                for &(row, l) in &col[1..] {
                    x[row] -= l * lki;
                }
                d -= lki * lki;
                cols[i].push((k, lki));
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: k, value: d });
            }
            cols[k].push((k, libm::sqrt(d)));
        }

        let nnz = cols.iter().map(Vec::len).sum();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for col in cols {
            for (i, v) in col {
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { n, perm, col_ptr, row_idx, values })
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    pub(crate) fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Solves `L y = b` in place (permuted coordinates).
    pub(crate) fn forward(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let (start, end) = (self.col_ptr[j], self.col_ptr[j + 1]);
            y[j] /= self.values[start];
            let yj = y[j];
            if yj != 0.0 {
                for p in start + 1..end {
                    y[self.row_idx[p]] -= self.values[p] * yj;
                }
            }
        }
    }

    /// Solves `L' x = y` in place (permuted coordinates).
    pub(crate) fn backward(&self, x: &mut [f64]) {
        for j in (0..self.n).rev() {
            let (start, end) = (self.col_ptr[j], self.col_ptr[j + 1]);
            let mut acc = x[j];
            for p in start + 1..end {
                acc -= self.values[p] * x[self.row_idx[p]];
            }
            x[j] = acc / self.values[start];
        }
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut work: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        self.forward(&mut work);
        self.backward(&mut work);
        let mut out = DVector::zeros(self.n);
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = work[k];
        }
        out
    }

    /// `U = L'` with its columns mapped back to the original indices, so that
    /// `U'U = F`. `U` is upper triangular only in elimination order.
    pub(crate) fn upper(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                u[(j, self.perm[self.row_idx[p]])] = self.values[p];
            }
        }
        u
    }
}

// Elimination tree of a matrix given by its upper-triangular columns.
fn etree(upper: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = upper.len();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &(i, _) in &upper[k] {
            let mut i = i;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}
