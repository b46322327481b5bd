//! Independent global solvers for `min r'Hr + 2g'r + p` on the unit sphere.
//!
//! [`solve_trs`] diagonalizes `H` and solves the secular equation
//! `sum_i c_i^2 / (l_i + lambda)^2 = 1` for the multiplier, falling back to
//! an eigenvector completion in the hard case. [`grid_search`] is a
//! brute-force check for dimensions two and three. [`check_kkt`] certifies a
//! candidate without solving anything: `r` is a global minimizer iff
//! `(H + lambda I) r = -g` and `H + lambda I` is positive semidefinite.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::problem::SclsProblem;

/// Largest dimension [`solve_trs`] and [`check_kkt`] will diagonalize.
pub const DENSE_LIMIT: usize = 2000;

const MAX_SECULAR_ITERS: usize = 200;
const SECULAR_REL_WIDTH: f64 = 1e-14;
const POLISH_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub r_star: DVector<f64>,
    pub objective: f64,
    /// `lambda` with `(H + lambda I) r_star = -g`.
    pub multiplier: f64,
    /// `g` had no component along the bottom eigenspace of `H` and the
    /// solution needed an added eigenvector to reach the sphere.
    pub hard_case: bool,
}

fn dense_h(prob: &SclsProblem) -> Result<DMatrix<f64>> {
    let dim = prob.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::DimensionTooLarge { dim, limit: DENSE_LIMIT });
    }
    Ok(prob.h().to_dense())
}

/// Global minimizer via eigendecomposition and the secular equation.
pub fn solve_trs(prob: &SclsProblem) -> Result<OracleSolution> {
    let h = dense_h(prob)?;
    let dim = prob.dim();
    let eig = SymmetricEigen::new(h);
    let lam = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let c = q.tr_mul(prob.g());

    let imin = lam.imin();
    let lmin = lam[imin];
    let lscale = lam.amax().max(1.0);
    let bottom: Vec<bool> = lam.iter().map(|&l| l - lmin <= 1e-12 * lscale * dim as f64).collect();
    let gnorm = c.norm();
    let gb = libm::sqrt(c.iter().zip(&bottom).filter(|(_, b)| **b).map(|(v, _)| v * v).sum());

    if gb <= 1e-12 * gnorm.max(f64::MIN_POSITIVE) || gnorm == 0.0 {
        // candidate hard case: solve with the pole removed
        let xhat = DVector::from_fn(dim, |i, _| if bottom[i] { 0.0 } else { -c[i] / (lam[i] - lmin) });
        let xn2 = xhat.norm_squared();
        if xn2 <= 1.0 {
            let tau = libm::sqrt(1.0 - xn2);
            let mut y = xhat;
            y[imin] += tau;
            let r = q * y;
            let r = &r / r.norm();
            return Ok(finish(prob, r, -lmin, true));
        }
    }

    let mu = secular_root(lam, &c, lmin, gnorm);
    let y = DVector::from_fn(dim, |i, _| -c[i] / (lam[i] + mu));
    let r = q * y;
    let r = &r / r.norm();
    Ok(finish(prob, r, mu, false))
}

fn finish(prob: &SclsProblem, r: DVector<f64>, multiplier: f64, hard_case: bool) -> OracleSolution {
    OracleSolution { objective: prob.objective(&r), r_star: r, multiplier, hard_case }
}

// Root of psi(mu) = 1/||x(mu)|| - 1 on (-lmin, -lmin + ||c||], where
// x_i(mu) = -c_i / (l_i + mu). psi is increasing there, negative near the
// pole and nonnegative at the right end.
fn secular_root(lam: &DVector<f64>, c: &DVector<f64>, lmin: f64, gnorm: f64) -> f64 {
    let eval = |mu: f64| -> (f64, f64) {
        let (mut n2, mut d3) = (0.0, 0.0);
        for (l, ci) in lam.iter().zip(c.iter()) {
            let den = l + mu;
            let t = ci / den;
            n2 += t * t;
            d3 += t * t / den;
        }
        let norm = libm::sqrt(n2);
        (1.0 / norm - 1.0, d3 / (n2 * norm))
    };

    let (mut lo, mut hi) = (-lmin, -lmin + gnorm);
    let mut mu = hi;
    for _ in 0..MAX_SECULAR_ITERS {
        let (psi, dpsi) = eval(mu);
        if psi == 0.0 {
            return mu;
        }
        if psi < 0.0 || psi.is_nan() {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= SECULAR_REL_WIDTH * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        let newton = mu - psi / dpsi;
        mu = if newton > lo && newton < hi && newton.is_finite() { newton } else { 0.5 * (lo + hi) };
    }
    // the right end keeps ||x|| <= 1, so the normalized point stays on the
    // correct branch
    let (psi, _) = eval(mu);
    if psi.is_nan() || psi < -1e-8 {
        hi
    } else {
        mu
    }
}

/// Brute-force minimizer for dimension 2 (`resolution` equally spaced
/// angles) or 3 (a Fibonacci lattice of `resolution` points), polished by
/// Riemannian Newton steps.
pub fn grid_search(prob: &SclsProblem, resolution: usize) -> Result<OracleSolution> {
    let dim = prob.dim();
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let resolution = resolution.max(1);
    let h = prob.h().to_dense();
    let g = prob.g().clone();
    let f = |r: &DVector<f64>| prob.objective(r);

    let point = |k: usize| -> DVector<f64> {
        if dim == 2 {
            let t = 2.0 * core::f64::consts::PI * k as f64 / resolution as f64;
            DVector::from_column_slice(&[libm::cos(t), libm::sin(t)])
        } else {
            let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
            let z = 1.0 - (2 * k + 1) as f64 / resolution as f64;
            let rad = libm::sqrt((1.0 - z * z).max(0.0));
            let phi = golden * k as f64;
            DVector::from_column_slice(&[rad * libm::cos(phi), rad * libm::sin(phi), z])
        }
    };

    let mut best = point(0);
    let mut best_f = f(&best);
    for k in 1..resolution {
        let r = point(k);
        let v = f(&r);
        if v < best_f {
            best = r;
            best_f = v;
        }
    }

    for _ in 0..POLISH_STEPS {
        let Some(next) = newton_on_sphere(&h, &g, &best) else { break };
        let v = f(&next);
        if v <= best_f {
            best = next;
            best_f = v;
        } else {
            break;
        }
    }

    let multiplier = -best.dot(&(&h * &best + &g));
    Ok(OracleSolution { objective: best_f, r_star: best, multiplier, hard_case: false })
}

// One Riemannian Newton step for r'Hr + 2g'r on the sphere, or a scaled
// gradient step where the Riemannian Hessian is not positive definite.
fn newton_on_sphere(h: &DMatrix<f64>, g: &DVector<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let dim = r.len();
    let basis = tangent_basis(r);
    let grad = (h * r + g) * 2.0;
    let radial = r.dot(&grad);
    let gt = basis.tr_mul(&grad);
    if gt.norm() == 0.0 {
        return None;
    }
    let ht = basis.tr_mul(&(h * &basis)) * 2.0 - DMatrix::identity(dim - 1, dim - 1) * radial;
    let step = match ht.clone().cholesky() {
        Some(ch) => -ch.solve(&gt),
        None => {
            let bound = 2.0 * h.norm() + radial.abs() + 1.0;
            -gt / bound
        }
    };
    let moved = r + basis * step;
    let norm = moved.norm();
    (norm > 0.0).then(|| moved / norm)
}

// Orthonormal basis of the complement of the unit vector r.
fn tangent_basis(r: &DVector<f64>) -> DMatrix<f64> {
    let dim = r.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(dim - 1);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| r[a].abs().partial_cmp(&r[b].abs()).unwrap_or(core::cmp::Ordering::Equal));
    for &i in &order {
        if cols.len() == dim - 1 {
            break;
        }
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        e -= r * r[i];
        for c in &cols {
            let proj = c.dot(&e);
            e -= c * proj;
        }
        let n = e.norm();
        if n > 1e-8 {
            cols.push(e / n);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Certifies `r` as a global minimizer and returns its multiplier
/// `lambda = -r'(Hr + g)`.
///
/// Fails with [`Error::NotStationary`] if `||r|| - 1` or
/// `||(H + lambda I) r + g|| / (1 + ||g||)` exceeds `tol`, and with
/// [`Error::NotGloballyCertified`] if `lambda_min(H) + lambda < -tol`.
pub fn check_kkt(prob: &SclsProblem, r: &DVector<f64>, tol: f64) -> Result<f64> {
    if r.len() != prob.dim() {
        return Err(Error::DimensionMismatch { what: "candidate r", expected: prob.dim(), found: r.len() });
    }
    let h = dense_h(prob)?;
    let norm_gap = (r.norm() - 1.0).abs();
    if !(norm_gap <= tol) {
        return Err(Error::NotStationary { residual: norm_gap });
    }
    let hr_g = &h * r + prob.g();
    let lambda = -r.dot(&hr_g);
    let residual = (hr_g + r * lambda).norm();
    if !(residual <= tol * (1.0 + prob.g().norm())) {
        return Err(Error::NotStationary { residual });
    }
    let lmin = SymmetricEigen::new(h).eigenvalues.min();
    let margin = lmin + lambda;
    if !(margin >= -tol) {
        return Err(Error::NotGloballyCertified { margin });
    }
    Ok(lambda)
}

/// The Lagrangian dual function at sphere multiplier `nu` and consensus dual
/// `u`:
///
/// ```text
/// p - g'H^{-1}g - u'u/(4 nu) - nu - u'H^{-1}u / 4 + u'H^{-1}g
/// ```
///
/// Returns `None` when `H` is numerically singular
/// (`lambda_min(H) < 1e-10 ||H||`) or too large to diagonalize.
pub fn dual_value(prob: &SclsProblem, nu: f64, u: &DVector<f64>) -> Option<f64> {
    let h = dense_h(prob).ok()?;
    let scale = h.norm();
    let lmin = SymmetricEigen::new(h.clone()).eigenvalues.min();
    if !(lmin >= 1e-10 * scale) || scale == 0.0 {
        return None;
    }
    let chol = h.cholesky()?;
    let g = prob.g();
    let hinv_g = chol.solve(g);
    let hinv_u = chol.solve(u);
    let uu = u.norm_squared();
    let ratio = if uu == 0.0 { 0.0 } else { uu / (4.0 * nu) };
    Some(prob.p() - g.dot(&hinv_g) - ratio - nu - u.dot(&hinv_u) / 4.0 + u.dot(&hinv_g))
}

/// [`dual_value`] at the multipliers implied by a sphere point `r`:
/// `u = 2Hr + 2g` and `nu = -r'(Hr + g)`.
pub fn dual_value_at(prob: &SclsProblem, r: &DVector<f64>) -> Option<f64> {
    let u = prob.gradient(r);
    let nu = -r.dot(&u) / 2.0;
    dual_value(prob, nu, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn quad(h: DMatrix<f64>, g: DVector<f64>, p: f64) -> SclsProblem {
        SclsProblem::from_quadratic(h, g, p).unwrap()
    }

    #[test]
    fn identity_gram_with_linear_term() {
        let prob = quad(DMatrix::identity(3, 3), dvector![-1.0, 0.0, 0.0], 2.5);
        let sol = solve_trs(&prob).unwrap();
        assert!((&sol.r_star - dvector![1.0, 0.0, 0.0]).amax() < 1e-12);
        assert!((sol.objective - 1.5).abs() < 1e-12);
        assert!(!sol.hard_case);
        assert!(check_kkt(&prob, &sol.r_star, 1e-9).is_ok());
    }

    #[test]
    fn zero_linear_term_gives_bottom_eigenvector() {
        let prob = quad(DMatrix::from_diagonal(&dvector![3.0, 0.5, 2.0]), DVector::zeros(3), 1.0);
        let sol = solve_trs(&prob).unwrap();
        assert!(sol.hard_case);
        assert!((sol.r_star[1].abs() - 1.0).abs() < 1e-12);
        assert!((sol.objective - 1.5).abs() < 1e-12);
        assert!((sol.multiplier + 0.5).abs() < 1e-12);
    }

    #[test]
    fn hard_case_completion() {
        // g lives in the top eigenspace; x_hat = (0, -0.5) so the solution
        // adds sqrt(3)/2 along e1
        let prob = quad(DMatrix::from_diagonal(&dvector![1.0, 3.0]), dvector![0.0, 1.0], 0.0);
        let sol = solve_trs(&prob).unwrap();
        assert!(sol.hard_case);
        assert!((sol.r_star[1] + 0.5).abs() < 1e-12);
        assert!((sol.r_star[0].abs() - libm::sqrt(0.75)).abs() < 1e-12);
        assert!((sol.r_star.norm() - 1.0).abs() < 1e-12);
        assert!(check_kkt(&prob, &sol.r_star, 1e-9).is_ok());
        let grid = grid_search(&prob, 10_000).unwrap();
        assert!((grid.objective - sol.objective).abs() < 1e-10);
    }

    #[test]
    fn grid_on_circle() {
        let prob = quad(DMatrix::identity(2, 2), dvector![-1.0, 0.0], 0.0);
        let sol = grid_search(&prob, 1_000_000).unwrap();
        assert!((&sol.r_star - dvector![1.0, 0.0]).amax() < 1e-6);
    }

    #[test]
    fn grid_on_constant_objective() {
        let prob = quad(DMatrix::identity(3, 3) * 2.0, DVector::zeros(3), 0.5);
        let sol = grid_search(&prob, 100).unwrap();
        assert!((sol.objective - 2.5).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_large_dimension() {
        let prob = quad(DMatrix::identity(4, 4), DVector::zeros(4), 0.0);
        assert_eq!(grid_search(&prob, 10), Err(Error::UnsupportedDimension(4)));
    }

    #[test]
    fn top_eigenvector_is_not_certified() {
        let prob = quad(DMatrix::from_diagonal(&dvector![1.0, 2.0, 5.0]), DVector::zeros(3), 0.0);
        let err = check_kkt(&prob, &dvector![0.0, 0.0, 1.0], 1e-6).unwrap_err();
        assert!(matches!(err, Error::NotGloballyCertified { .. }));
        assert!(matches!(
            check_kkt(&prob, &dvector![0.6, 0.8, 0.0], 1e-6),
            Err(Error::NotStationary { .. })
        ));
    }

    #[test]
    fn zero_duality_gap_on_nonsingular_gram() {
        let prob = quad(dmatrix![2.0, 0.3, 0.0; 0.3, 1.0, 0.1; 0.0, 0.1, 0.7], dvector![0.4, -1.0, 0.2], 3.0);
        let sol = solve_trs(&prob).unwrap();
        let d = dual_value_at(&prob, &sol.r_star).unwrap();
        assert!((d - sol.objective).abs() <= 1e-10 * sol.objective.abs().max(1.0));
    }

    #[test]
    fn dual_skipped_on_singular_gram() {
        let prob = quad(DMatrix::from_diagonal(&dvector![1.0, 0.0]), dvector![1.0, 1.0], 0.0);
        assert_eq!(dual_value_at(&prob, &dvector![1.0, 0.0]), None);
    }
}
