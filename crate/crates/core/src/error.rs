use thiserror::Error;

/// Which half of the descent check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentCheck {
    /// The dual update changed the augmented Lagrangian by something other
    /// than `rho * ||s - r||^2`.
    DualIdentity,
    /// The Lyapunov sequence increased.
    Lyapunov,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("regularization weight gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("non-finite entry in {0}")]
    NonFiniteEntry(&'static str),
    #[error("empty problem: m and n must both be at least 1")]
    Empty,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("point is not feasible: |w.w - gamma*alpha| = {gap:e}")]
    InfeasibleInput { gap: f64 },
    #[error("sphere point too close to the pole alpha~ = 1 (|1 - alpha~| = {distance:e})")]
    DegeneratePole { distance: f64 },
    #[error("shifted system is singular")]
    SingularSystem,
    #[error("r - v vanished; sphere projection is undefined")]
    ZeroDirection,
    #[error("descent check {check:?} violated at iteration {index}")]
    DescentViolation { index: usize, check: DescentCheck },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension {dim} exceeds the dense oracle budget of {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
    #[error("grid search supports dimension 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("point is not stationary: residual {residual:e}")]
    NotStationary { residual: f64 },
    #[error("stationary point is not a global minimizer: lambda_min(H) + lambda = {margin:e}")]
    NotGloballyCertified { margin: f64 },
    #[error("sparse matrix entry ({row}, {col}) out of range for {nrows}x{ncols}")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
