#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spgls_core::admm::ShiftedSystem;
use spgls_core::{Error, FeatureMatrix, ProblemData, Result, SclsProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn normal_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

pub fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = normal_vec(rng, n);
    let norm = v.norm();
    v / norm
}

/// A dense game instance with `gamma` drawn from `[0.01, 2]`.
pub fn random_data(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ProblemData {
    let x = normal_mat(rng, m, n);
    let y = normal_vec(rng, m);
    let z = normal_vec(rng, m);
    let gamma = rng.random_range(0.01..2.0);
    ProblemData::new(FeatureMatrix::Dense(x), y, z, gamma).unwrap()
}

/// `min r'Hr + 2g'r + p` with `H = A'A` for a random `A`.
pub fn random_quadratic(rng: &mut ChaCha8Rng, dim: usize, rows: usize) -> SclsProblem {
    let a = normal_mat(rng, rows, dim);
    let mut h = a.transpose() * &a;
    h = (&h + h.transpose()) * 0.5;
    let g = normal_vec(rng, dim);
    let p = rng.random_range(0.0..5.0);
    SclsProblem::from_quadratic(h, g, p).unwrap()
}

/// Relative gap `|a - b| / max(1, |b|)`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// An r-update through a fresh LU solve of the explicit shifted matrix.
/// Shares no code with the Cholesky factorizations.
pub struct LuSystem {
    lu: LU<f64, Dyn, Dyn>,
    dim: usize,
    rho: f64,
}

impl LuSystem {
    pub fn new(prob: &SclsProblem, rho: f64) -> Self {
        let n = prob.dim();
        let f = prob.h().to_dense() + DMatrix::identity(n, n) * (rho / 2.0);
        Self { lu: f.lu(), dim: n, rho }
    }
}

impl ShiftedSystem for LuSystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn solve_shifted(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu.solve(b).ok_or(Error::SingularSystem)
    }
    fn factorizations(&self) -> usize {
        0
    }
    fn triangular_solves(&self) -> usize {
        0
    }
}
