//! Maps between the bilevel game, its quadratic-fractional form and the
//! sphere-constrained form, plus objective evaluators for each.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{FeatureMatrix, ProblemData, SclsProblem};

/// Relative slack accepted on `w.w = gamma * alpha` by [`to_sphere`].
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// `|1 - alpha~|` below which [`from_sphere`] refuses to map back.
pub const POLE_TOL: f64 = 1e-9;

/// A point `(w, alpha)` of the quadratic-fractional program.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalPoint {
    pub w: DVector<f64>,
    pub alpha: f64,
}

impl FractionalPoint {
    /// The feasible point with `alpha = w.w / gamma`.
    pub fn feasible(w: DVector<f64>, gamma: f64) -> Self {
        let alpha = w.norm_squared() / gamma;
        Self { w, alpha }
    }

    /// Whether `w.w = gamma * alpha` holds to relative tolerance `tol`.
    pub fn is_feasible(&self, gamma: f64, tol: f64) -> bool {
        let ga = gamma * self.alpha;
        self.alpha >= 0.0 && (self.w.norm_squared() - ga).abs() <= tol * ga.max(1.0)
    }
}

/// A point `(w~, alpha~)` on the unit sphere in dimension `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    pub wt: DVector<f64>,
    pub at: f64,
}

impl SpherePoint {
    /// Splits a stacked vector `r = (w~; alpha~)`.
    pub fn from_stacked(r: &DVector<f64>) -> Self {
        let n = r.len() - 1;
        Self { wt: r.rows(0, n).into_owned(), at: r[n] }
    }

    /// The stacked vector `r = (w~; alpha~)`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.wt.len();
        let mut r = self.wt.clone().resize_vertically(n + 1, 0.0);
        r[n] = self.at;
        r
    }

    pub fn is_on_sphere(&self, tol: f64) -> bool {
        (self.wt.norm_squared() + self.at * self.at - 1.0).abs() <= tol
    }
}

/// The follower's manipulated features for a fixed learner model `w`:
/// row `i` becomes `x_i + (z_i - w.x_i) / (gamma + w.w) * w`.
pub fn best_response(data: &ProblemData, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    if w.len() != data.n() {
        return Err(Error::DimensionMismatch { what: "model w", expected: data.n(), found: w.len() });
    }
    let xw = data.x.mul_vec(w);
    let denom = data.gamma + w.norm_squared();
    let shift: DVector<f64> = (&data.z - xw) / denom;
    let mut out = match &data.x {
        FeatureMatrix::Dense(x) => x.clone(),
        FeatureMatrix::Sparse(x) => x.to_dense(),
    };
    out.ger(1.0, &shift, w, 1.0);
    Ok(out)
}

/// The follower's cost for row `i` at a candidate `xhat`:
/// `(w.xhat - z_i)^2 + gamma ||xhat - x_i||^2`.
pub fn follower_cost(data: &ProblemData, i: usize, w: &DVector<f64>, xhat: &DVector<f64>) -> f64 {
    let xi = data.x.row(i);
    let pred = w.dot(xhat) - data.z[i];
    pred * pred + data.gamma * (xhat - xi).norm_squared()
}

/// The learner's loss `||X* w - y||^2` after the follower best-responds.
pub fn bilevel_objective(data: &ProblemData, w: &DVector<f64>) -> Result<f64> {
    let xs = best_response(data, w)?;
    Ok((xs * w - &data.y).norm_squared())
}

/// `||(alpha z + X w) / (1 + alpha) - y||^2`.
pub fn fractional_objective(data: &ProblemData, pt: &FractionalPoint) -> f64 {
    fractional_prediction(data, pt)
        .zip_map(&data.y, |a, b| a - b)
        .norm_squared()
}

/// The learner's prediction `(alpha z + X w) / (1 + alpha)`.
pub fn fractional_prediction(data: &ProblemData, pt: &FractionalPoint) -> DVector<f64> {
    (&data.z * pt.alpha + data.x.mul_vec(&pt.w)) / (1.0 + pt.alpha)
}

/// `r'Hr + 2g'r + p`; total in `r`, which need not lie on the sphere.
pub fn scls_objective(prob: &SclsProblem, r: &DVector<f64>) -> f64 {
    prob.objective(r)
}

/// `w~ = 2w / (sqrt(gamma)(1 + alpha))`, `alpha~ = (alpha - 1)/(alpha + 1)`.
pub fn to_sphere(pt: &FractionalPoint, gamma: f64) -> Result<SpherePoint> {
    let ga = gamma * pt.alpha;
    let gap = (pt.w.norm_squared() - ga).abs();
    if pt.alpha < 0.0 || !(gap <= FEASIBILITY_TOL * ga.max(1.0)) {
        return Err(Error::InfeasibleInput { gap });
    }
    let scale = 2.0 / (libm::sqrt(gamma) * (1.0 + pt.alpha));
    Ok(SpherePoint {
        wt: &pt.w * scale,
        at: (pt.alpha - 1.0) / (pt.alpha + 1.0),
    })
}

/// `w = sqrt(gamma) w~ / (1 - alpha~)`, `alpha = (1 + alpha~)/(1 - alpha~)`.
pub fn from_sphere(sp: &SpherePoint, gamma: f64) -> Result<FractionalPoint> {
    let distance = (1.0 - sp.at).abs();
    if !(distance >= POLE_TOL) {
        return Err(Error::DegeneratePole { distance });
    }
    let denom = 1.0 - sp.at;
    Ok(FractionalPoint {
        w: &sp.wt * (libm::sqrt(gamma) / denom),
        alpha: (1.0 + sp.at) / denom,
    })
}
