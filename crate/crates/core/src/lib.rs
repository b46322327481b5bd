//! Global solvers for least-squares Stackelberg prediction games.
//!
//! A learner fits `w` to labels `y` while a data provider shifts each feature
//! row toward a target `z_i`, paying `gamma` per unit of squared movement.
//! The bilevel problem reduces exactly to minimizing a convex quadratic over
//! the unit sphere, which this crate solves by ADMM with a once-factored
//! linear system.
//!
//! ```
//! use spgls_core::{chol, compile, oracle, synth, SolverConfig};
//!
//! let data = synth::generate(&synth::GenSpec::new(60, 8, 1)).unwrap();
//! let prob = compile(&data).unwrap();
//! let report = chol::solve_cd_admm(&prob, &SolverConfig::default()).unwrap();
//! let best = oracle::solve_trs(&prob).unwrap();
//! assert!(report.converged);
//! assert!((report.objective - best.objective).abs() <= 1e-6 * best.objective.abs().max(1.0));
//! ```
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod admm;
pub mod chol;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod reformulate;
pub mod sparse;
pub mod synth;

pub use admm::{solve_admm, AdmmState, ExplicitInverse, Init, SolveReport, SolverConfig, TraceEntry};
pub use chol::{prepare, prepare_with, solve_cd_admm, FactorPath, PreparedSolver};
pub use error::{Error, Result};
pub use oracle::{check_kkt, solve_trs, OracleSolution};
pub use problem::{compile, compile_with, validate, CompileOptions, FeatureMatrix, Gram, ProblemData, SclsProblem};
pub use reformulate::{FractionalPoint, SpherePoint};
pub use sparse::CscMatrix;

pub use nalgebra::{DMatrix, DVector};
