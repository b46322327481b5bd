//! JSON shapes written by the command-line tool.

use serde::{Deserialize, Serialize};
use spgls_core::{OracleSolution, SolveReport};

/// Describes where an instance came from. Written by `gen` next to the data
/// file and accepted by `solve --instance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub gamma: f64,
    /// Generator seed; absent for instances loaded from user files.
    pub seed: Option<u64>,
    /// `modest`, `severe` or `file`.
    pub scenario: String,
    pub noise_sigma: Option<f64>,
    /// `csv` or `sparse`; absent for in-memory instances.
    pub format: Option<String>,
    /// Data file, relative to the descriptor's directory.
    pub data_file: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// ADMM with an explicit inverse formed once.
    Admm,
    /// ADMM with a one-time Cholesky factorization.
    CdAdmm,
    /// Eigendecomposition-based global solver.
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Admm => "admm",
            Method::CdAdmm => "cd-admm",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub rho: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub init: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: InstanceDescriptor,
    pub method: Method,
    pub config: Option<ConfigEcho>,
    pub objective: f64,
    pub sphere_objective: f64,
    pub r_star: Vec<f64>,
    pub s_star: Vec<f64>,
    pub v_star: Option<Vec<f64>>,
    pub w_recovered: Option<Vec<f64>>,
    pub alpha_recovered: Option<f64>,
    pub recovery_error: Option<String>,
    pub iterations: usize,
    pub converged: bool,
    pub r_pri: Option<f64>,
    pub r_dual: Option<f64>,
    pub factorizations: usize,
    pub triangular_solves: usize,
    /// `dense` or `sparse` for CD-ADMM.
    pub factor_path: Option<String>,
    pub prepare_seconds: f64,
    pub solve_seconds: f64,
    pub certified: Option<bool>,
    pub multiplier: Option<f64>,
    pub hard_case: Option<bool>,
    pub oracle_objective: Option<f64>,
    pub rel_err_vs_oracle: Option<f64>,
}

/// `(f_method - f_oracle) / max(1, |f_oracle|)`.
pub fn rel_err(f_method: f64, f_oracle: f64) -> f64 {
    (f_method - f_oracle) / f_oracle.abs().max(1.0)
}

impl RunRecord {
    pub fn from_admm(
        instance: InstanceDescriptor,
        method: Method,
        config: ConfigEcho,
        report: &SolveReport,
        factor_path: Option<String>,
        prepare_seconds: f64,
        solve_seconds: f64,
    ) -> Self {
        Self {
            instance,
            method,
            config: Some(config),
            objective: report.objective,
            sphere_objective: report.sphere_objective,
            r_star: report.r_star.as_slice().to_vec(),
            s_star: report.s_star.as_slice().to_vec(),
            v_star: Some(report.v_star.as_slice().to_vec()),
            w_recovered: report.w_recovered.as_ref().map(|w| w.as_slice().to_vec()),
            alpha_recovered: report.alpha_recovered,
            recovery_error: report.recovery_error.as_ref().map(|e| e.to_string()),
            iterations: report.iterations,
            converged: report.converged,
            r_pri: Some(report.r_pri),
            r_dual: Some(report.r_dual),
            factorizations: report.factorizations,
            triangular_solves: report.triangular_solves,
            factor_path,
            prepare_seconds,
            solve_seconds,
            certified: None,
            multiplier: None,
            hard_case: None,
            oracle_objective: None,
            rel_err_vs_oracle: None,
        }
    }

    /// The oracle run. `converged` mirrors `certified`.
    pub fn from_oracle(
        instance: InstanceDescriptor,
        sol: &OracleSolution,
        certified: bool,
        recovery: (Option<Vec<f64>>, Option<f64>, Option<String>),
        solve_seconds: f64,
    ) -> Self {
        let r = sol.r_star.as_slice().to_vec();
        Self {
            instance,
            method: Method::Oracle,
            config: None,
            objective: sol.objective,
            sphere_objective: sol.objective,
            r_star: r.clone(),
            s_star: r,
            v_star: None,
            w_recovered: recovery.0,
            alpha_recovered: recovery.1,
            recovery_error: recovery.2,
            iterations: 0,
            converged: certified,
            r_pri: None,
            r_dual: None,
            factorizations: 0,
            triangular_solves: 0,
            factor_path: None,
            prepare_seconds: 0.0,
            solve_seconds,
            certified: Some(certified),
            multiplier: Some(sol.multiplier),
            hard_case: Some(sol.hard_case),
            oracle_objective: Some(sol.objective),
            rel_err_vs_oracle: Some(0.0),
        }
    }

    pub fn attach_oracle(&mut self, f_oracle: f64) {
        self.oracle_objective = Some(f_oracle);
        self.rel_err_vs_oracle = Some(rel_err(self.objective, f_oracle));
    }
}

/// Per-iteration trace row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub r_pri: f64,
    pub r_dual: f64,
    pub objective: f64,
}

/// One row of the `compare` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub gamma: f64,
    pub scenario: String,
    pub method: Method,
    /// `ok`, `failed` or `skipped`.
    pub status: String,
    pub message: Option<String>,
    pub trials: usize,
    pub converged: usize,
    pub rel_err_avg: Option<f64>,
    pub rel_err_min: Option<f64>,
    pub rel_err_max: Option<f64>,
    pub iterations_avg: Option<f64>,
    pub factorizations_avg: Option<f64>,
    pub time_avg: Option<f64>,
    pub oracle_time_avg: Option<f64>,
}

/// One row of the `bench` table. Times are medians in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub gamma: f64,
    pub repeats: usize,
    pub admm_prepare: f64,
    pub admm_iterate: f64,
    pub admm_total: f64,
    pub admm_iterations: usize,
    pub cd_prepare: f64,
    pub cd_iterate: f64,
    pub cd_total: f64,
    pub cd_iterations: usize,
    pub cd_factor_path: String,
    pub cd_factorizations: usize,
    pub oracle_total: Option<f64>,
    /// `oracle_total / cd_total`.
    pub ratio1: Option<f64>,
    /// `admm_total / cd_total`.
    pub ratio2: f64,
}
