//! Game instances and their compiled sphere-constrained quadratic form.
//!
//! A [`ProblemData`] holds the raw game: features `X` (m x n), true labels
//! `y`, the provider's targets `z` and the manipulation weight `gamma`.
//! [`compile`] turns it into an [`SclsProblem`]
//!
//! ```text
//! f(r) = ||L r - (y - z/2)||^2 = r'Hr + 2g'r + p,     L = [ sqrt(gamma)/2 X | z/2 ]
//! ```
//!
//! to be minimized over the unit sphere `r'r = 1` in dimension `n + 1`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

/// Feature matrix storage. Sparse inputs stay sparse through compilation.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(a) => a.nrows(),
            FeatureMatrix::Sparse(a) => a.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(a) => a.ncols(),
            FeatureMatrix::Sparse(a) => a.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, FeatureMatrix::Sparse(_))
    }

    pub fn nnz(&self) -> usize {
        match self {
            FeatureMatrix::Dense(a) => a.len(),
            FeatureMatrix::Sparse(a) => a.nnz(),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeatureMatrix::Dense(a) => a * x,
            FeatureMatrix::Sparse(a) => a.mul_vec(x.as_slice()),
        }
    }

    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeatureMatrix::Dense(a) => a.tr_mul(x),
            FeatureMatrix::Sparse(a) => a.tr_mul_vec(x.as_slice()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            FeatureMatrix::Dense(a) => a.clone(),
            FeatureMatrix::Sparse(a) => a.to_dense(),
        }
    }

    /// Row `i` as a dense column vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        match self {
            FeatureMatrix::Dense(a) => a.row(i).transpose(),
            FeatureMatrix::Sparse(a) => DVector::from_fn(a.ncols(), |j, _| a.get(i, j)),
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            FeatureMatrix::Dense(a) => a.iter().all(|v| v.is_finite()),
            FeatureMatrix::Sparse(a) => a.all_finite(),
        }
    }

    fn scale(&mut self, c: f64) {
        match self {
            FeatureMatrix::Dense(a) => *a *= c,
            FeatureMatrix::Sparse(a) => a.scale(c),
        }
    }
}

/// A game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub x: FeatureMatrix,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub gamma: f64,
}

impl ProblemData {
    /// Builds and validates an instance.
    pub fn new(x: FeatureMatrix, y: DVector<f64>, z: DVector<f64>, gamma: f64) -> Result<Self> {
        let data = Self { x, y, z, gamma };
        validate(&data)?;
        Ok(data)
    }

    /// Number of samples.
    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    /// Number of features.
    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    /// Multiplies `X`, `y` and `z` by `c`. The game's minimizer `w` is
    /// unchanged and every objective value scales by `c^2`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.x.scale(c);
        out.y *= c;
        out.z *= c;
        out
    }
}

/// Checks dimensions, finiteness and `gamma > 0`.
pub fn validate(data: &ProblemData) -> Result<()> {
    let m = data.x.nrows();
    if m == 0 || data.x.ncols() == 0 {
        return Err(Error::Empty);
    }
    if data.y.len() != m {
        return Err(Error::DimensionMismatch { what: "labels y", expected: m, found: data.y.len() });
    }
    if data.z.len() != m {
        return Err(Error::DimensionMismatch { what: "targets z", expected: m, found: data.z.len() });
    }
    if !data.gamma.is_finite() {
        return Err(Error::NonFiniteEntry("gamma"));
    }
    if data.gamma <= 0.0 {
        return Err(Error::NonPositiveGamma(data.gamma));
    }
    if !data.x.all_finite() {
        return Err(Error::NonFiniteEntry("X"));
    }
    if !data.y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteEntry("y"));
    }
    if !data.z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteEntry("z"));
    }
    Ok(())
}

/// Storage for the Gram matrix `H`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gram {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl Gram {
    pub fn dim(&self) -> usize {
        match self {
            Gram::Dense(h) => h.nrows(),
            Gram::Sparse(h) => h.nrows(),
        }
    }

    /// Stored entries; a dense matrix counts its exact nonzeros.
    pub fn nnz(&self) -> usize {
        match self {
            Gram::Dense(h) => h.iter().filter(|v| **v != 0.0).count(),
            Gram::Sparse(h) => h.nnz(),
        }
    }

    /// `nnz / dim^2`.
    pub fn density(&self) -> f64 {
        let d = self.dim() as f64;
        self.nnz() as f64 / (d * d)
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Gram::Dense(h) => h * x,
            Gram::Sparse(h) => h.mul_vec(x.as_slice()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Gram::Dense(h) => h.clone(),
            Gram::Sparse(h) => h.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> CscMatrix {
        match self {
            Gram::Dense(h) => CscMatrix::from_dense(h, 0.0),
            Gram::Sparse(h) => h.clone(),
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        match self {
            Gram::Dense(h) => h.norm(),
            Gram::Sparse(h) => libm::sqrt(h.values().iter().map(|v| v * v).sum()),
        }
    }

    fn asymmetry(&self) -> f64 {
        match self {
            Gram::Dense(h) => (h - h.transpose()).amax(),
            Gram::Sparse(h) => h.asymmetry(),
        }
    }
}

/// Compilation knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    /// `H` is materialized dense when `n + 1` is at most this.
    pub dense_threshold: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { dense_threshold: 4096 }
    }
}

/// `min r'Hr + 2g'r + p  s.t.  ||r|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SclsProblem {
    lhat: Option<FeatureMatrix>,
    target: Option<DVector<f64>>,
    gamma: Option<f64>,
    h: Gram,
    g: DVector<f64>,
    p: f64,
}

impl SclsProblem {
    /// Wraps an explicit quadratic `(H, g, p)` with no least-squares factor.
    /// `H` must be square, finite and symmetric.
    pub fn from_quadratic(h: DMatrix<f64>, g: DVector<f64>, p: f64) -> Result<Self> {
        Self::from_gram(Gram::Dense(h), g, p)
    }

    /// Like [`from_quadratic`](Self::from_quadratic) for any [`Gram`] storage.
    pub fn from_gram(h: Gram, g: DVector<f64>, p: f64) -> Result<Self> {
        let dim = h.dim();
        let cols = match &h {
            Gram::Dense(m) => m.ncols(),
            Gram::Sparse(m) => m.ncols(),
        };
        if cols != dim {
            return Err(Error::DimensionMismatch { what: "square H", expected: dim, found: cols });
        }
        if dim == 0 {
            return Err(Error::Empty);
        }
        if g.len() != dim {
            return Err(Error::DimensionMismatch { what: "linear term g", expected: dim, found: g.len() });
        }
        let finite = match &h {
            Gram::Dense(m) => m.iter().all(|v| v.is_finite()),
            Gram::Sparse(m) => m.all_finite(),
        };
        if !finite {
            return Err(Error::NonFiniteEntry("H"));
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteEntry("g"));
        }
        if !p.is_finite() {
            return Err(Error::NonFiniteEntry("p"));
        }
        if h.asymmetry() > 1e-12 * h.norm().max(1.0) {
            return Err(Error::InvalidConfig("H must be symmetric"));
        }
        Ok(Self { lhat: None, target: None, gamma: None, h, g, p })
    }

    /// Dimension `n + 1` of the sphere.
    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn h(&self) -> &Gram {
        &self.h
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `L = [sqrt(gamma)/2 X | z/2]` when compiled from a game instance.
    pub fn lhat(&self) -> Option<&FeatureMatrix> {
        self.lhat.as_ref()
    }

    /// `y - z/2` when compiled from a game instance.
    pub fn target(&self) -> Option<&DVector<f64>> {
        self.target.as_ref()
    }

    /// The game's `gamma` when compiled from a game instance.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// `r'Hr + 2g'r + p`.
    pub fn objective(&self, r: &DVector<f64>) -> f64 {
        let hr = self.h.mul_vec(r);
        r.dot(&hr) + 2.0 * self.g.dot(r) + self.p
    }

    /// `||L r - (y - z/2)||^2`, the residual form of the same objective.
    pub fn residual_objective(&self, r: &DVector<f64>) -> Option<f64> {
        let (l, t) = (self.lhat.as_ref()?, self.target.as_ref()?);
        Some((l.mul_vec(r) - t).norm_squared())
    }

    /// `grad f(r) = 2(Hr + g)`.
    pub fn gradient(&self, r: &DVector<f64>) -> DVector<f64> {
        (self.h.mul_vec(r) + &self.g) * 2.0
    }
}

/// [`compile_with`] using default options.
pub fn compile(data: &ProblemData) -> Result<SclsProblem> {
    compile_with(data, &CompileOptions::default())
}

/// Assembles `L`, `H = L'L`, `g = L'(z/2 - y)` and `p = ||z/2 - y||^2`.
pub fn compile_with(data: &ProblemData, opts: &CompileOptions) -> Result<SclsProblem> {
    validate(data)?;
    let (m, n) = (data.m(), data.n());
    let half_root_gamma = libm::sqrt(data.gamma) / 2.0;
    let half_z: DVector<f64> = &data.z / 2.0;

    let lhat = match &data.x {
        FeatureMatrix::Dense(x) => {
            let mut l = DMatrix::zeros(m, n + 1);
            l.columns_mut(0, n).copy_from(&(x * half_root_gamma));
            l.column_mut(n).copy_from(&half_z);
            FeatureMatrix::Dense(l)
        }
        FeatureMatrix::Sparse(x) => {
            let mut l = x.clone();
            l.scale(half_root_gamma);
            l.push_dense_col(half_z.as_slice());
            FeatureMatrix::Sparse(l)
        }
    };

    let dim = n + 1;
    let h = match &lhat {
        FeatureMatrix::Dense(l) => {
            let h = dense_gram(l);
            if dim <= opts.dense_threshold {
                Gram::Dense(h)
            } else {
                Gram::Sparse(CscMatrix::from_dense(&h, 0.0))
            }
        }
        FeatureMatrix::Sparse(l) => {
            let h = l.gram();
            if dim <= opts.dense_threshold {
                Gram::Dense(h.to_dense())
            } else {
                Gram::Sparse(h)
            }
        }
    };

    let target: DVector<f64> = &data.y - &half_z;
    let g = -lhat.tr_mul_vec(&target);
    let p = target.norm_squared();
    Ok(SclsProblem { lhat: Some(lhat), target: Some(target), gamma: Some(data.gamma), h, g, p })
}

// Column dot products; each off-diagonal entry is computed once and mirrored.
fn dense_gram(l: &DMatrix<f64>) -> DMatrix<f64> {
    let k = l.ncols();
    let cols: Vec<_> = (0..k).map(|j| l.column(j)).collect();
    let mut h = DMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..=j {
            let v = cols[i].dot(&cols[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}
