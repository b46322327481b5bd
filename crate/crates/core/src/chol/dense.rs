use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense upper-triangular factor `U` with `F = U'U`, stored row-major so that
/// both the factorization and the two triangular sweeps run over contiguous rows.
#[derive(Debug, Clone)]
pub(crate) struct DenseCholesky {
    n: usize,
    u: Vec<f64>,
}

impl DenseCholesky {
    /// Right-looking factorization of the symmetric matrix `a + shift * I`.
    /// Only the upper triangle of `a` is read.
    pub(crate) fn factor(a: &DMatrix<f64>, shift: f64) -> Result<Self> {
        let n = a.nrows();
        let mut u = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                u[i * n + j] = a[(i, j)];
            }
            u[i * n + i] += shift;
        }
        for j in 0..n {
            let d = u[j * n + j];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let root = libm::sqrt(d);
            u[j * n + j] = root;
            for v in &mut u[j * n + j + 1..(j + 1) * n] {
                *v /= root;
            }
            let (done, rest) = u.split_at_mut((j + 1) * n);
            let row_j = &done[j * n..];
            for i in j + 1..n {
                let a_ji = row_j[i];
                if a_ji == 0.0 {
                    continue;
                }
                let row_i = &mut rest[(i - j - 1) * n..(i - j) * n];
                for (dst, src) in row_i[i..].iter_mut().zip(&row_j[i..]) {
                    *dst -= a_ji * src;
                }
            }
        }
        Ok(Self { n, u })
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    /// Solves `U' y = b` in place.
    pub(crate) fn forward(&self, y: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let row = &self.u[k * n..(k + 1) * n];
            y[k] /= row[k];
            let yk = y[k];
            if yk != 0.0 {
                for (dst, src) in y[k + 1..].iter_mut().zip(&row[k + 1..]) {
                    *dst -= yk * src;
                }
            }
        }
    }

    /// Solves `U x = y` in place.
    pub(crate) fn backward(&self, x: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let row = &self.u[i * n..(i + 1) * n];
            let dot: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - dot) / row[i];
        }
    }

    pub(crate) fn upper(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| if j >= i { self.u[i * n + j] } else { 0.0 })
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.forward(x.as_mut_slice());
        self.backward(x.as_mut_slice());
        x
    }
}
