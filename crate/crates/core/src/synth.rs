//! Seeded synthetic game instances.
//!
//! Features are standard normal with a given expected density, labels come
//! from a standard-normal ground-truth model plus Gaussian noise, and the
//! provider's targets are `z = y + c * sd(y) * u` for a standard-normal `u`
//! and a scenario constant `c`.
//!
//! The draws for `X`, the ground truth and the label noise share one ChaCha8
//! stream; `u` comes from a second stream of the same seed, so
//! [`synthesize_targets`] reproduces the `z` of [`generate`] from `y` alone.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::problem::{FeatureMatrix, ProblemData};
use crate::sparse::CscMatrix;

const TARGET_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Modest,
    Severe,
    /// Targets supplied by the caller.
    Explicit(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    /// Expected fraction of nonzero features, in `(0, 1]`.
    pub density: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub scenario: Scenario,
    pub gamma: f64,
    pub modest_scale: f64,
    pub severe_scale: f64,
}

impl GenSpec {
    /// A dense modest-scenario spec with `gamma = 0.1` and noise `0.1`.
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            density: 1.0,
            noise_sigma: 0.1,
            seed,
            scenario: Scenario::Modest,
            gamma: 0.1,
            modest_scale: 0.5,
            severe_scale: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Empty);
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidConfig("density must lie in (0, 1]"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig("noise sigma must be nonnegative and finite"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::NonPositiveGamma(self.gamma));
        }
        if let Scenario::Explicit(z) = &self.scenario {
            if z.len() != self.m {
                return Err(Error::DimensionMismatch { what: "explicit targets z", expected: self.m, found: z.len() });
            }
        }
        Ok(())
    }

    /// The multiplier `c` in `z = y + c sd(y) u`, if the scenario is synthetic.
    pub fn scenario_scale(&self) -> Option<f64> {
        match self.scenario {
            Scenario::Modest => Some(self.modest_scale),
            Scenario::Severe => Some(self.severe_scale),
            Scenario::Explicit(_) => None,
        }
    }
}

/// Draws an instance. Identical specs give bit-identical output.
pub fn generate(spec: &GenSpec) -> Result<ProblemData> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let x = if spec.density >= 1.0 {
        let mut x = DMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                x[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        FeatureMatrix::Dense(x)
    } else {
        FeatureMatrix::Sparse(sparse_normal(m, n, spec.density, &mut rng)?)
    };

    let w0: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let noise: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    let y = x.mul_vec(&w0) + noise * spec.noise_sigma;

    let z = match (&spec.scenario, spec.scenario_scale()) {
        (Scenario::Explicit(z), _) => z.clone(),
        (_, Some(c)) => synthesize_targets(&y, c, spec.seed),
        _ => unreachable!(),
    };
    ProblemData::new(x, y, z, spec.gamma)
}

/// `z = y + scale * sd(y) * u` with `u` standard normal from `seed`.
/// `sd` is the sample standard deviation (zero when `m < 2`).
pub fn synthesize_targets(y: &DVector<f64>, scale: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TARGET_STREAM);
    let u: DVector<f64> = DVector::from_fn(y.len(), |_, _| StandardNormal.sample(&mut rng));
    y + u * (scale * sample_sd(y))
}

fn sample_sd(y: &DVector<f64>) -> f64 {
    let m = y.len();
    if m < 2 {
        return 0.0;
    }
    let mean = y.mean();
    let ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    libm::sqrt(ss / (m - 1) as f64)
}

// Each entry is kept independently with probability `density`; positions
// are visited in column-major order by geometric skips.
fn sparse_normal(m: usize, n: usize, density: f64, rng: &mut ChaCha8Rng) -> Result<CscMatrix> {
    let total = m as u128 * n as u128;
    let log_q = libm::log1p(-density);
    let mut triplets = Vec::with_capacity((density * total as f64 * 1.1) as usize + 16);
    let mut pos: u128 = 0;
    loop {
        let u: f64 = rng.random();
        // skip ~ Geometric(density): failures before the next kept entry
        let skip = libm::floor(libm::log1p(-u) / log_q);
        if !(skip < (total - pos) as f64) {
            break;
        }
        pos += skip as u128;
        let (i, j) = ((pos % m as u128) as usize, (pos / m as u128) as usize);
        let v: f64 = StandardNormal.sample(rng);
        triplets.push((i, j, v));
        pos += 1;
        if pos >= total {
            break;
        }
    }
    CscMatrix::from_triplets(m, n, &triplets)
}
