//! Consensus ADMM on `min f(r) s.t. s = r, ||s|| = 1` in scaled form.
//!
//! Each iteration performs, in this order,
//!
//! ```text
//! r <- (H + rho/2 I)^{-1} (-g + rho/2 (s + v))
//! s <- (r - v) / ||r - v||
//! v <- v + s - r
//! ```
//!
//! and stops once `max(||s - r||, rho ||s_new - s_old||) <= eps`. The linear
//! solve goes through a [`ShiftedSystem`], normally a factorization from
//! [`crate::chol`].

use alloc::vec::Vec;
use core::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chol::FactorPath;
use crate::error::{DescentCheck, Error, Result};
use crate::problem::SclsProblem;
use crate::reformulate::{from_sphere, SpherePoint};

/// Starting point for `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// The last standard basis vector `e_{n+1}`.
    #[default]
    LastAxis,
    /// A normalized standard-normal draw from the given seed.
    RandomUnit(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rho: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub init: Init,
    /// Keep one [`TraceEntry`] per iteration.
    pub record_trace: bool,
    /// Keep every [`AdmmState`], including the initial one; needed by
    /// [`assert_descent`].
    pub record_states: bool,
    /// Factorization path used by [`crate::chol::solve_cd_admm`].
    pub path: FactorPath,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 5.0,
            eps: 1e-8,
            max_iters: 10_000,
            init: Init::LastAxis,
            record_trace: false,
            record_states: false,
            path: FactorPath::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig("rho must be positive and finite"));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidConfig("eps must be positive and finite"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// A prepared solver for `(H + rho/2 I) x = b`.
pub trait ShiftedSystem {
    fn dim(&self) -> usize;
    fn rho(&self) -> f64;
    fn solve_shifted(&self, b: &DVector<f64>) -> Result<DVector<f64>>;
    /// Factorizations performed while preparing this solver.
    fn factorizations(&self) -> usize;
    /// Cumulative triangular solves since preparation.
    fn triangular_solves(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub r: DVector<f64>,
    pub s: DVector<f64>,
    /// Scaled dual `u / rho`.
    pub v: DVector<f64>,
    pub iter: usize,
    pub r_pri: f64,
    pub r_dual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub r_pri: f64,
    pub r_dual: f64,
    /// `f(r^k)`.
    pub objective: f64,
    /// `f(s^k)`, the objective at the feasible iterate.
    pub sphere_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub r_star: DVector<f64>,
    pub s_star: DVector<f64>,
    pub v_star: DVector<f64>,
    /// `f(r_star)`.
    pub objective: f64,
    /// `f(s_star)`.
    pub sphere_objective: f64,
    /// Model recovered from `s_star`, when the problem carries `gamma` and
    /// `s_star` is away from the pole.
    pub w_recovered: Option<DVector<f64>>,
    pub alpha_recovered: Option<f64>,
    /// Why recovery was skipped, if it was attempted and failed.
    pub recovery_error: Option<Error>,
    pub iterations: usize,
    pub converged: bool,
    pub r_pri: f64,
    pub r_dual: f64,
    pub trace: Option<Vec<TraceEntry>>,
    pub states: Option<Vec<AdmmState>>,
    pub factorizations: usize,
    pub triangular_solves: usize,
    /// Filled in by callers that can read a clock.
    pub solve_time: Option<Duration>,
}

/// `s0` per the policy, `r0 = s0`, `v0 = 0`.
pub fn init_state(prob: &SclsProblem, cfg: &SolverConfig) -> AdmmState {
    let dim = prob.dim();
    let s = match cfg.init {
        Init::LastAxis => {
            let mut e = DVector::zeros(dim);
            e[dim - 1] = 1.0;
            e
        }
        Init::RandomUnit(seed) => random_unit(dim, seed),
    };
    AdmmState { r: s.clone(), v: DVector::zeros(dim), s, iter: 0, r_pri: 0.0, r_dual: 0.0 }
}

fn random_unit(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let q: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let norm = q.norm();
        if norm > 0.0 {
            return q / norm;
        }
    }
}

/// Minimizes `f(r) + rho/2 ||s - r + v||^2` over `r`.
pub fn update_r<S: ShiftedSystem + ?Sized>(
    prob: &SclsProblem,
    state: &AdmmState,
    cfg: &SolverConfig,
    solver: &S,
) -> Result<DVector<f64>> {
    if !(cfg.rho > 0.0) {
        return Err(Error::SingularSystem);
    }
    if solver.rho() != cfg.rho {
        return Err(Error::InvalidConfig("solver was prepared for a different rho"));
    }
    if solver.dim() != prob.dim() {
        return Err(Error::DimensionMismatch { what: "prepared solver", expected: prob.dim(), found: solver.dim() });
    }
    let rhs = (&state.s + &state.v) * (cfg.rho / 2.0) - prob.g();
    solver.solve_shifted(&rhs)
}

/// Projects `r - v` onto the unit sphere.
pub fn update_s(r: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let d = r - v;
    let norm = d.norm();
    if !(norm >= 1e-300) {
        return Err(Error::ZeroDirection);
    }
    Ok(d / norm)
}

/// `v + s - r`.
pub fn update_v(v: &DVector<f64>, s: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
    v + s - r
}

/// Runs the loop from [`init_state`] until the residual test passes or
/// `cfg.max_iters` is reached. A vanishing `r - v` keeps the previous `s`.
pub fn solve<S: ShiftedSystem + ?Sized>(prob: &SclsProblem, cfg: &SolverConfig, solver: &S) -> Result<SolveReport> {
    cfg.validate()?;
    let solves_before = solver.triangular_solves();
    let mut state = init_state(prob, cfg);
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut states = cfg.record_states.then(|| alloc::vec![state.clone()]);
    let mut converged = false;

    while state.iter < cfg.max_iters {
        let r = update_r(prob, &state, cfg, solver)?;
        let s = match update_s(&r, &state.v) {
            Ok(s) => s,
            Err(Error::ZeroDirection) => state.s.clone(),
            Err(e) => return Err(e),
        };
        let v = update_v(&state.v, &s, &r);
        state.r_pri = (&s - &r).norm();
        state.r_dual = cfg.rho * (&s - &state.s).norm();
        state.iter += 1;
        state.r = r;
        state.s = s;
        state.v = v;

        if let Some(t) = trace.as_mut() {
            t.push(TraceEntry {
                iter: state.iter,
                r_pri: state.r_pri,
                r_dual: state.r_dual,
                objective: prob.objective(&state.r),
                sphere_objective: prob.objective(&state.s),
            });
        }
        if let Some(st) = states.as_mut() {
            st.push(state.clone());
        }
        if state.r_pri.max(state.r_dual) <= cfg.eps {
            converged = true;
            break;
        }
    }

    let (w_recovered, alpha_recovered, recovery_error) = match prob.gamma() {
        None => (None, None, None),
        Some(gamma) => match from_sphere(&SpherePoint::from_stacked(&state.s), gamma) {
            Ok(pt) => (Some(pt.w), Some(pt.alpha), None),
            Err(e) => (None, None, Some(e)),
        },
    };

    Ok(SolveReport {
        objective: prob.objective(&state.r),
        sphere_objective: prob.objective(&state.s),
        w_recovered,
        alpha_recovered,
        recovery_error,
        iterations: state.iter,
        converged,
        r_pri: state.r_pri,
        r_dual: state.r_dual,
        trace,
        states,
        factorizations: solver.factorizations(),
        triangular_solves: solver.triangular_solves() - solves_before,
        solve_time: None,
        r_star: state.r,
        s_star: state.s,
        v_star: state.v,
    })
}

/// The plain ADMM linear step: `(H + rho/2 I)^{-1}` formed once as an explicit
/// dense matrix, then one matrix-vector product per iteration. Reports zero
/// factorizations and zero triangular solves.
#[derive(Debug, Clone)]
pub struct ExplicitInverse {
    inv: DMatrix<f64>,
    rho: f64,
}

impl ExplicitInverse {
    pub fn new(prob: &SclsProblem, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidConfig("rho must be positive and finite"));
        }
        let dim = prob.dim();
        let f = prob.h().to_dense() + DMatrix::identity(dim, dim) * (0.5 * rho);
        let inv = f.try_inverse().ok_or(Error::SingularSystem)?;
        Ok(Self { inv, rho })
    }
}

impl ShiftedSystem for ExplicitInverse {
    fn dim(&self) -> usize {
        self.inv.nrows()
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn solve_shifted(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.inv * b)
    }
    fn factorizations(&self) -> usize {
        0
    }
    fn triangular_solves(&self) -> usize {
        0
    }
}

/// ADMM with a precomputed explicit inverse.
pub fn solve_admm(prob: &SclsProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    solve(prob, cfg, &ExplicitInverse::new(prob, cfg.rho)?)
}

/// The scaled augmented Lagrangian
/// `f(r) + rho/2 ||s - r + v||^2 - rho/2 ||v||^2`.
pub fn augmented_lagrangian(prob: &SclsProblem, rho: f64, r: &DVector<f64>, s: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let d = s - r + v;
    prob.objective(r) + rho / 2.0 * (d.norm_squared() - v.norm_squared())
}

/// `Phi^k = L(r^k, s^k, v^k) + rho/2 ||s^k - s^{k-1}||^2` for `k >= 1`.
pub fn lyapunov(prob: &SclsProblem, rho: f64, cur: &AdmmState, prev: &AdmmState) -> f64 {
    augmented_lagrangian(prob, rho, &cur.r, &cur.s, &cur.v) + rho / 2.0 * (&cur.s - &prev.s).norm_squared()
}

/// Iterations skipped before Lyapunov monotonicity is enforced.
pub const DESCENT_BURN_IN: usize = 2;

/// Checks a recorded state sequence (initial state first).
///
/// For every step the dual update must raise the augmented Lagrangian by
/// exactly `rho ||s^k - r^k||^2`, to `1e-9` relative. After
/// [`DESCENT_BURN_IN`] iterations the Lyapunov sequence must not increase by
/// more than `1e-9 (1 + |Phi|)`. Returns the iteration of the first failure.
pub fn assert_descent(prob: &SclsProblem, rho: f64, states: &[AdmmState]) -> Result<()> {
    let mut prev_phi: Option<f64> = None;
    for k in 1..states.len() {
        let (prev, cur) = (&states[k - 1], &states[k]);
        let after = augmented_lagrangian(prob, rho, &cur.r, &cur.s, &cur.v);
        let before = augmented_lagrangian(prob, rho, &cur.r, &cur.s, &prev.v);
        let expected = rho * (&cur.s - &cur.r).norm_squared();
        let scale = after.abs().max(before.abs()).max(1.0);
        if !((after - before - expected).abs() <= 1e-9 * scale) {
            return Err(Error::DescentViolation { index: cur.iter, check: DescentCheck::DualIdentity });
        }

        let phi = after + rho / 2.0 * (&cur.s - &prev.s).norm_squared();
        if cur.iter > DESCENT_BURN_IN {
            if let Some(p) = prev_phi {
                if !(phi <= p + 1e-9 * (1.0 + phi.abs())) {
                    return Err(Error::DescentViolation { index: cur.iter, check: DescentCheck::Lyapunov });
                }
            }
        }
        prev_phi = Some(phi);
    }
    Ok(())
}

/// `||2 H s + 2 g - rho v||_inf`, which vanishes at a fixed point.
pub fn stationarity_residual(prob: &SclsProblem, rho: f64, s: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (prob.gradient(s) - v * rho).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chol::{prepare_with, FactorPath};
    use nalgebra::{dmatrix, dvector};

    // An r-update backed by a fresh LU solve, independent of the Cholesky code.
    struct LuSystem {
        f: DMatrix<f64>,
        rho: f64,
    }

    impl ShiftedSystem for LuSystem {
        fn dim(&self) -> usize {
            self.f.nrows()
        }
        fn rho(&self) -> f64 {
            self.rho
        }
        fn solve_shifted(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
            self.f.clone().lu().solve(b).ok_or(Error::SingularSystem)
        }
        fn factorizations(&self) -> usize {
            0
        }
        fn triangular_solves(&self) -> usize {
            0
        }
    }

    fn lu_for(prob: &SclsProblem, rho: f64) -> LuSystem {
        let n = prob.dim();
        LuSystem { f: prob.h().to_dense() + DMatrix::identity(n, n) * (rho / 2.0), rho }
    }

    fn state(s: DVector<f64>, v: DVector<f64>) -> AdmmState {
        AdmmState { r: s.clone(), s, v, iter: 0, r_pri: 0.0, r_dual: 0.0 }
    }

    #[test]
    fn last_axis_init() {
        let prob = SclsProblem::from_quadratic(DMatrix::identity(3, 3), DVector::zeros(3), 0.0).unwrap();
        let st = init_state(&prob, &SolverConfig::default());
        assert_eq!(st.s, dvector![0.0, 0.0, 1.0]);
        assert_eq!(st.r, st.s);
        assert_eq!(st.v, DVector::zeros(3));
        assert_eq!(st.iter, 0);
    }

    #[test]
    fn random_init_is_seeded_and_unit() {
        let prob = SclsProblem::from_quadratic(DMatrix::identity(5, 5), DVector::zeros(5), 0.0).unwrap();
        let cfg = SolverConfig { init: Init::RandomUnit(7), ..Default::default() };
        let a = init_state(&prob, &cfg);
        let b = init_state(&prob, &cfg);
        assert_eq!(a, b);
        assert!((a.s.norm() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { rho: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { eps: -1.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { rho: f64::NAN, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn r_update_is_proximal_step_when_quadratic_vanishes() {
        let prob = SclsProblem::from_quadratic(DMatrix::zeros(2, 2), DVector::zeros(2), 0.0).unwrap();
        let cfg = SolverConfig { rho: 3.0, ..Default::default() };
        let solver = prepare_with(&prob, 3.0, FactorPath::Dense).unwrap();
        let st = state(dvector![0.6, 0.8], dvector![0.5, -1.0]);
        let r = update_r(&prob, &st, &cfg, &solver).unwrap();
        assert!((r - dvector![1.1, -0.2]).amax() < 1e-15);
    }

    #[test]
    fn r_update_identity_gram() {
        let prob = SclsProblem::from_quadratic(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        let cfg = SolverConfig { rho: 2.0, ..Default::default() };
        let solver = prepare_with(&prob, 2.0, FactorPath::Dense).unwrap();
        let st = state(dvector![1.0, 0.0], dvector![0.0, 2.0]);
        let r = update_r(&prob, &st, &cfg, &solver).unwrap();
        assert!((r - dvector![0.5, 1.0]).amax() < 1e-15);
    }

    #[test]
    fn r_update_rejects_mismatched_rho() {
        let prob = SclsProblem::from_quadratic(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        let solver = prepare_with(&prob, 2.0, FactorPath::Dense).unwrap();
        let st = state(dvector![1.0, 0.0], dvector![0.0, 0.0]);
        assert!(update_r(&prob, &st, &SolverConfig::default(), &solver).is_err());
    }

    #[test]
    fn s_update_normalizes() {
        let s = update_s(&dvector![3.0, 4.0], &dvector![0.0, 0.0]).unwrap();
        assert_eq!(s, dvector![0.6, 0.8]);
        let unit = dvector![0.0, 1.0];
        assert_eq!(update_s(&unit, &DVector::zeros(2)).unwrap(), unit);
        assert_eq!(update_s(&dvector![1.0, 1.0], &dvector![1.0, 1.0]), Err(Error::ZeroDirection));
    }

    #[test]
    fn v_update() {
        let v = dvector![0.25, -1.0];
        let s = dvector![1.0, 0.0];
        assert_eq!(update_v(&v, &s, &s), v);
        assert_eq!(update_v(&DVector::zeros(2), &dvector![1.0, 0.0], &DVector::zeros(2)), dvector![1.0, 0.0]);
    }

    #[test]
    fn linear_term_along_first_axis() {
        // f = 5 - 4 r1 on the sphere, minimized at e1 with value 1
        let prob = SclsProblem::from_quadratic(DMatrix::identity(3, 3), dvector![-2.0, 0.0, 0.0], 4.0).unwrap();
        let cfg = SolverConfig { rho: 2.0, eps: 1e-10, record_trace: true, ..Default::default() };
        let rep = solve(&prob, &cfg, &lu_for(&prob, 2.0)).unwrap();
        assert!(rep.converged);
        assert!((&rep.r_star - dvector![1.0, 0.0, 0.0]).amax() < 1e-8);
        assert!((rep.objective - 1.0).abs() < 1e-8);
        let trace = rep.trace.unwrap();
        assert_eq!(trace.len(), rep.iterations);
        let last = trace.last().unwrap();
        assert_eq!((last.iter, last.r_pri, last.r_dual), (rep.iterations, rep.r_pri, rep.r_dual));
        assert_eq!(last.objective, rep.objective);
    }

    #[test]
    fn diagonal_gram_reaches_smallest_eigenvalue() {
        let prob = SclsProblem::from_quadratic(
            DMatrix::from_diagonal(&dvector![0.5, 1.0, 2.0, 4.0]),
            DVector::zeros(4),
            0.0,
        )
        .unwrap();
        let cfg = SolverConfig { rho: 5.0, init: Init::RandomUnit(3), record_states: true, ..Default::default() };
        let solver = prepare_with(&prob, 5.0, FactorPath::Dense).unwrap();
        let rep = solve(&prob, &cfg, &solver).unwrap();
        assert!(rep.converged);
        assert!((rep.objective - 0.5).abs() < 1e-7);
        assert!(1.0 - rep.s_star[0].abs() < 1e-7);
        assert_eq!(rep.factorizations, 1);
        assert_eq!(rep.triangular_solves, 2 * rep.iterations);
        assert_eq!(assert_descent(&prob, 5.0, rep.states.as_ref().unwrap()), Ok(()));
    }

    #[test]
    fn converged_flag_matches_residuals() {
        let prob = SclsProblem::from_quadratic(dmatrix![2.0, 0.5; 0.5, 1.0], dvector![0.3, -0.2], 1.0).unwrap();
        for max_iters in [1, 3, 10_000] {
            let cfg = SolverConfig { max_iters, ..Default::default() };
            let rep = solve(&prob, &cfg, &lu_for(&prob, cfg.rho)).unwrap();
            assert_eq!(rep.converged, rep.r_pri.max(rep.r_dual) <= cfg.eps);
            assert_eq!(rep.objective, prob.objective(&rep.r_star));
            assert!(rep.iterations <= max_iters);
        }
    }

    #[test]
    fn descent_trivially_holds_on_short_traces() {
        let prob = SclsProblem::from_quadratic(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        assert_eq!(assert_descent(&prob, 1.0, &[]), Ok(()));
        assert_eq!(assert_descent(&prob, 1.0, &[state(dvector![1.0, 0.0], DVector::zeros(2))]), Ok(()));
    }

    #[test]
    fn corrupted_dual_is_caught() {
        let prob = SclsProblem::from_quadratic(dmatrix![2.0, 0.5; 0.5, 1.0], dvector![0.3, -0.2], 1.0).unwrap();
        let cfg = SolverConfig { record_states: true, max_iters: 12, ..Default::default() };
        let rep = solve(&prob, &cfg, &lu_for(&prob, cfg.rho)).unwrap();
        let mut states = rep.states.unwrap();
        states[6].v[0] += 1e-3;
        assert_eq!(
            assert_descent(&prob, cfg.rho, &states),
            Err(Error::DescentViolation { index: 6, check: DescentCheck::DualIdentity })
        );
    }

    #[test]
    fn half_rho_dual_identity_does_not_hold() {
        // the dual step moves the augmented Lagrangian by rho ||d||^2;
        // rho/2 ||d||^2 is off by a factor of two
        let prob = SclsProblem::from_quadratic(dmatrix![2.0, 0.5; 0.5, 1.0], dvector![0.3, -0.2], 1.0).unwrap();
        let rho = 5.0;
        let cfg = SolverConfig { rho, record_states: true, max_iters: 2, ..Default::default() };
        let rep = solve(&prob, &cfg, &lu_for(&prob, rho)).unwrap();
        let st = rep.states.unwrap();
        let (prev, cur) = (&st[0], &st[1]);
        let delta = augmented_lagrangian(&prob, rho, &cur.r, &cur.s, &cur.v)
            - augmented_lagrangian(&prob, rho, &cur.r, &cur.s, &prev.v);
        let d2 = (&cur.s - &cur.r).norm_squared();
        assert!(d2 > 1e-6);
        assert!((delta - rho * d2).abs() < 1e-12 * delta.abs().max(1.0));
        assert!((delta - rho / 2.0 * d2).abs() > 0.1 * delta.abs());
    }
}
