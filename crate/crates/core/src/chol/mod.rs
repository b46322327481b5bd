//! Factor-once linear solves for the ADMM `r`-update.
//!
//! The shifted matrix `F = H + (rho/2) I` is constant for a fixed penalty, so
//! [`prepare`] factors it once as `F = U'U` and every
//! [`PreparedSolver::solve_shifted`] call is a forward sweep with `U'` followed
//! by a back sweep with `U`. No inverse is ever formed.
//!
//! Two storage paths exist. The dense path factors `F` in its natural
//! ordering. The sparse path first computes a minimum-degree permutation and
//! factors the permuted matrix in compressed column form. [`FactorPath::Auto`]
//! picks the sparse path when `nnz(H) / dim^2` is below
//! [`SPARSE_DENSITY_THRESHOLD`].

mod dense;
mod ordering;
mod sparse;

use core::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::admm::{self, ShiftedSystem, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::problem::{Gram, SclsProblem};

use dense::DenseCholesky;
use sparse::SparseCholesky;

/// Default density below which [`FactorPath::Auto`] selects the sparse path.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.05;

static FACTORIZATIONS: AtomicUsize = AtomicUsize::new(0);

/// Number of factorizations performed by [`prepare`] in this process.
pub fn factorizations_total() -> usize {
    FACTORIZATIONS.load(Ordering::Relaxed)
}

/// Storage path for the factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorPath {
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl FactorPath {
    /// Resolves `Auto` against the density of `h`.
    pub fn resolve(self, h: &Gram, threshold: f64) -> FactorPath {
        match self {
            FactorPath::Auto if h.density() < threshold => FactorPath::Sparse,
            FactorPath::Auto => FactorPath::Dense,
            other => other,
        }
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(DenseCholesky),
    Sparse(SparseCholesky),
}

/// A Cholesky factorization of `H + (rho/2) I`, ready for repeated solves.
#[derive(Debug)]
pub struct PreparedSolver {
    factor: Factor,
    rho: f64,
    triangular_solves: AtomicUsize,
}

/// Factors `H + (rho/2) I`, choosing the path automatically.
pub fn prepare(prob: &SclsProblem, rho: f64) -> Result<PreparedSolver> {
    prepare_with(prob, rho, FactorPath::Auto)
}

/// Factors `H + (rho/2) I` on the requested path.
pub fn prepare_with(prob: &SclsProblem, rho: f64, path: FactorPath) -> Result<PreparedSolver> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig("rho must be positive and finite"));
    }
    let shift = rho / 2.0;
    let h = prob.h();
    let factor = match path.resolve(h, SPARSE_DENSITY_THRESHOLD) {
        FactorPath::Sparse => Factor::Sparse(SparseCholesky::factor(&h.to_sparse(), shift)?),
        _ => {
            let dense = match h {
                Gram::Dense(m) => DenseCholesky::factor(m, shift)?,
                Gram::Sparse(m) => DenseCholesky::factor(&m.to_dense(), shift)?,
            };
            Factor::Dense(dense)
        }
    };
    FACTORIZATIONS.fetch_add(1, Ordering::Relaxed);
    Ok(PreparedSolver { factor, rho, triangular_solves: AtomicUsize::new(0) })
}

impl PreparedSolver {
    pub fn dim(&self) -> usize {
        match &self.factor {
            Factor::Dense(f) => f.dim(),
            Factor::Sparse(f) => f.dim(),
        }
    }

    /// The penalty this factorization was built for.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The path actually used (never `Auto`).
    pub fn path(&self) -> FactorPath {
        match self.factor {
            Factor::Dense(_) => FactorPath::Dense,
            Factor::Sparse(_) => FactorPath::Sparse,
        }
    }

    /// Factorizations performed to build this solver. Always one.
    pub fn factorizations(&self) -> usize {
        1
    }

    /// Triangular solves performed so far (two per `solve_shifted`).
    pub fn triangular_solves(&self) -> usize {
        self.triangular_solves.load(Ordering::Relaxed)
    }

    /// Stored entries of the factor (the full triangle on the dense path).
    pub fn factor_nnz(&self) -> usize {
        match &self.factor {
            Factor::Dense(f) => f.dim() * (f.dim() + 1) / 2,
            Factor::Sparse(f) => f.factor_nnz(),
        }
    }

    /// Elimination order on the sparse path.
    pub fn permutation(&self) -> Option<&[usize]> {
        match &self.factor {
            Factor::Dense(_) => None,
            Factor::Sparse(f) => Some(f.permutation()),
        }
    }

    /// A matrix `U` with `U'U = H + (rho/2) I`. On the sparse path its columns
    /// are in original order, so it is triangular only after permutation.
    pub fn upper_factor(&self) -> DMatrix<f64> {
        match &self.factor {
            Factor::Dense(f) => f.upper(),
            Factor::Sparse(f) => f.upper(),
        }
    }

    /// Solves `(H + (rho/2) I) r = b` with one forward and one back sweep.
    pub fn solve_shifted(&self, b: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(b.len(), self.dim());
        self.triangular_solves.fetch_add(2, Ordering::Relaxed);
        match &self.factor {
            Factor::Dense(f) => f.solve(b),
            Factor::Sparse(f) => f.solve(b),
        }
    }
}

impl ShiftedSystem for PreparedSolver {
    fn dim(&self) -> usize {
        PreparedSolver::dim(self)
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn solve_shifted(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(PreparedSolver::solve_shifted(self, b))
    }

    fn factorizations(&self) -> usize {
        1
    }

    fn triangular_solves(&self) -> usize {
        PreparedSolver::triangular_solves(self)
    }
}

/// The Cholesky-backed ADMM: one [`prepare`] on `cfg.path`, then the standard
/// loop with every `r`-update routed through [`PreparedSolver::solve_shifted`].
pub fn solve_cd_admm(prob: &SclsProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let solver = prepare_with(prob, cfg.rho, cfg.path)?;
    admm::solve(prob, cfg, &solver)
}
