use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use spgls_core::admm::{self, ExplicitInverse};
use spgls_core::chol::prepare_with;
use spgls_core::oracle::{check_kkt, solve_trs};
use spgls_core::reformulate::{from_sphere, SpherePoint};
use spgls_core::synth::{generate, GenSpec, Scenario};
use spgls_core::{compile, DVector, Error, FactorPath, Init, ProblemData, SclsProblem, SolverConfig};
use thiserror::Error as ThisError;

use crate::io::{self, CsvSchema, DataError};
use crate::record::{
    rel_err, BenchRow, CompareRow, ConfigEcho, InstanceDescriptor, Method, RunRecord, TraceRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Caps the worker threads used by `compare`.
pub const THREADS_ENV: &str = "SPG_SCLS_THREADS";

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) | CliError::Data(DataError::Invalid(e)) => core_exit_code(e),
            _ => EXIT_INPUT,
        }
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::NotPositiveDefinite { .. }
        | Error::SingularSystem
        | Error::ZeroDirection
        | Error::DescentViolation { .. }
        | Error::NotStationary { .. }
        | Error::NotGloballyCertified { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "spgls", version, about = "Global solvers for least-squares Stackelberg prediction games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance and write it with a JSON descriptor.
    Gen(GenCmd),
    /// Solve one instance and print a JSON run record.
    Solve(SolveCmd),
    /// Compare solvers against the oracle over a grid of instances.
    Compare(CompareCmd),
    /// Time ADMM against CD-ADMM over a grid of instances.
    Bench(BenchCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Modest,
    Severe,
}

impl ScenarioArg {
    fn name(self) -> &'static str {
        match self {
            ScenarioArg::Modest => "modest",
            ScenarioArg::Severe => "severe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Auto,
    Dense,
    Sparse,
}

impl From<PathArg> for FactorPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Auto => FactorPath::Auto,
            PathArg::Dense => FactorPath::Dense,
            PathArg::Sparse => FactorPath::Sparse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// CSV when the density is 1, the sparse text format otherwise.
    Auto,
    Csv,
    Sparse,
}

/// `last-axis` or `random:SEED`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitArg(pub Init);

impl FromStr for InitArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "last-axis" {
            return Ok(InitArg(Init::LastAxis));
        }
        match s.strip_prefix("random:") {
            Some(seed) => seed
                .parse()
                .map(|seed| InitArg(Init::RandomUnit(seed)))
                .map_err(|e| format!("bad seed in {s:?}: {e}")),
            None => Err(format!("expected `last-axis` or `random:SEED`, got {s:?}")),
        }
    }
}

impl InitArg {
    fn name(self) -> String {
        match self.0 {
            Init::LastAxis => "last-axis".into(),
            Init::RandomUnit(seed) => format!("random:{seed}"),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScenarioArg::Modest)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub modest_scale: f64,
    #[arg(long, default_value_t = 2.0)]
    pub severe_scale: f64,
}

impl InstanceArgs {
    fn spec(&self) -> GenSpec {
        GenSpec {
            m: self.m,
            n: self.n,
            density: self.density,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            scenario: scenario(self.scenario),
            gamma: self.gamma,
            modest_scale: self.modest_scale,
            severe_scale: self.severe_scale,
        }
    }

    fn descriptor(&self) -> InstanceDescriptor {
        InstanceDescriptor {
            m: self.m,
            n: self.n,
            density: self.density,
            gamma: self.gamma,
            seed: Some(self.seed),
            scenario: self.scenario.name().into(),
            noise_sigma: Some(self.noise_sigma),
            format: None,
            data_file: None,
        }
    }
}

fn scenario(s: ScenarioArg) -> Scenario {
    match s {
        ScenarioArg::Modest => Scenario::Modest,
        ScenarioArg::Severe => Scenario::Severe,
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 5.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// `last-axis` or `random:SEED`.
    #[arg(long, default_value = "last-axis")]
    pub init: InitArg,
    #[arg(long, value_enum, default_value_t = PathArg::Auto)]
    pub path: PathArg,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            eps: self.eps,
            max_iters: self.max_iters,
            init: self.init.0,
            path: self.path.into(),
            ..Default::default()
        }
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            rho: self.rho,
            eps: self.eps,
            max_iters: self.max_iters,
            init: self.init.name(),
            path: format!("{:?}", self.path).to_lowercase(),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenCmd {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Base name of the written files.
    #[arg(long, default_value = "instance")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct SolveCmd {
    /// A descriptor written by `gen` (`.json`), a CSV file, or a sparse text
    /// file. Without it an instance is generated from the flags.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub gen: InstanceArgs,
    #[arg(long, value_enum, default_value_t = Method::CdAdmm)]
    pub method: Method,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write `iter, r_pri, r_dual, objective` rows to this CSV file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also run the oracle and report the relative error against it.
    #[arg(long)]
    pub vs_oracle: bool,
    /// CSV column holding the labels.
    #[arg(long, default_value = "y")]
    pub y_column: String,
    /// CSV column holding the targets.
    #[arg(long, default_value = "z")]
    pub z_column: String,
    /// Comma-separated CSV feature columns; default is every other column.
    #[arg(long)]
    pub features: Option<String>,
    /// Ignore any z column and synthesize targets from `--scenario` and
    /// `--seed`.
    #[arg(long)]
    pub synthesize_z: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Comma-separated `MxN` sizes.
    #[arg(long, default_value = "200x100,100x100,50x100")]
    pub sizes: String,
    /// Comma-separated gamma values.
    #[arg(long, default_value = "0.1,0.01")]
    pub gammas: String,
    /// Comma-separated scenarios.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "modest,severe")]
    pub scenarios: Vec<ScenarioArg>,
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    /// Trial `t` uses seed `seed + t`.
    #[arg(long, default_value_t = 1000)]
    pub seed: u64,
    /// Write the table as CSV to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Comma-separated methods compared against the oracle.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cd-admm")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Timed repetitions per cell; medians are reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Also time the oracle where the dimension allows it.
    #[arg(long)]
    pub with_oracle: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Parses `args` (including the program name), runs the command, writes
/// results to `out` and diagnostics to `err`, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(c) => cmd_gen(&c, out),
        Command::Solve(c) => cmd_solve(&c, out),
        Command::Compare(c) => cmd_compare(&c, out),
        Command::Bench(c) => cmd_bench(&c, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_gen(cmd: &GenCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    let data = generate(&cmd.instance.spec())?;
    let sparse = match cmd.format {
        FormatArg::Auto => cmd.instance.density < 1.0,
        FormatArg::Csv => false,
        FormatArg::Sparse => true,
    };
    fs::create_dir_all(&cmd.out)?;
    let (format, file) = if sparse {
        ("sparse", format!("{}.txt", cmd.name))
    } else {
        ("csv", format!("{}.csv", cmd.name))
    };
    let data_path = cmd.out.join(&file);
    if sparse {
        io::write_sparse(&data, &data_path)?;
    } else {
        io::write_csv(&data, &data_path)?;
    }
    let desc = InstanceDescriptor {
        format: Some(format.into()),
        data_file: Some(file),
        ..cmd.instance.descriptor()
    };
    let mut json = serde_json::to_string_pretty(&desc)?;
    json.push('\n');
    fs::write(cmd.out.join(format!("{}.json", cmd.name)), &json)?;
    out.write_all(json.as_bytes())?;
    Ok(EXIT_OK)
}

fn file_descriptor(data: &ProblemData, format: &str, file: &Path) -> InstanceDescriptor {
    InstanceDescriptor {
        m: data.m(),
        n: data.n(),
        density: data.x.nnz() as f64 / (data.m() * data.n()) as f64,
        gamma: data.gamma,
        seed: None,
        scenario: "file".into(),
        noise_sigma: None,
        format: Some(format.into()),
        data_file: Some(file.display().to_string()),
    }
}

fn load_instance(cmd: &SolveCmd) -> Result<(ProblemData, InstanceDescriptor), CliError> {
    let Some(path) = &cmd.instance else {
        return Ok((generate(&cmd.gen.spec())?, cmd.gen.descriptor()));
    };
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "json" => {
            let desc: InstanceDescriptor = serde_json::from_str(&fs::read_to_string(path)?)?;
            let file = desc
                .data_file
                .as_ref()
                .ok_or_else(|| CliError::Usage("descriptor has no data_file".into()))?;
            let data_path = path.parent().unwrap_or(Path::new(".")).join(file);
            let data = match desc.format.as_deref() {
                Some("csv") => io::load_csv(&data_path, &CsvSchema::standard(desc.gamma))?,
                Some("sparse") => io::load_sparse(&data_path, desc.gamma)?,
                other => return Err(CliError::Usage(format!("unknown instance format {other:?}"))),
            };
            if data.m() != desc.m || data.n() != desc.n {
                return Err(CliError::Usage(format!(
                    "descriptor says {}x{} but the data file is {}x{}",
                    desc.m,
                    desc.n,
                    data.m(),
                    data.n()
                )));
            }
            Ok((data, desc))
        }
        "csv" => {
            let schema = CsvSchema {
                y_column: cmd.y_column.clone(),
                z_column: (!cmd.synthesize_z).then(|| cmd.z_column.clone()),
                feature_columns: cmd
                    .features
                    .as_ref()
                    .map(|f| f.split(',').map(|s| s.trim().to_string()).collect()),
                gamma: cmd.gen.gamma,
                synthesize: cmd.synthesize_z.then(|| {
                    let spec = cmd.gen.spec();
                    (spec.scenario_scale().unwrap_or(spec.modest_scale), cmd.gen.seed)
                }),
            };
            let data = io::load_csv(path, &schema)?;
            let mut desc = file_descriptor(&data, "csv", path);
            if cmd.synthesize_z {
                desc.scenario = cmd.gen.scenario.name().into();
                desc.seed = Some(cmd.gen.seed);
            }
            Ok((data, desc))
        }
        _ => {
            let data = io::load_sparse(path, cmd.gen.gamma)?;
            let desc = file_descriptor(&data, "sparse", path);
            Ok((data, desc))
        }
    }
}

fn recovered(prob: &SclsProblem, r: &DVector<f64>) -> (Option<Vec<f64>>, Option<f64>, Option<String>) {
    match prob.gamma() {
        None => (None, None, None),
        Some(gamma) => match from_sphere(&SpherePoint::from_stacked(r), gamma) {
            Ok(pt) => (Some(pt.w.as_slice().to_vec()), Some(pt.alpha), None),
            Err(e) => (None, None, Some(e.to_string())),
        },
    }
}

/// Runs one ADMM variant with separate prepare and iterate timings.
fn run_admm(
    prob: &SclsProblem,
    method: Method,
    cfg: &SolverConfig,
) -> Result<(admm::SolveReport, Option<String>, Duration, Duration), Error> {
    cfg.validate()?;
    match method {
        Method::Admm => {
            let t0 = Instant::now();
            let inv = ExplicitInverse::new(prob, cfg.rho)?;
            let prep = t0.elapsed();
            let t1 = Instant::now();
            let mut rep = admm::solve(prob, cfg, &inv)?;
            let iter = t1.elapsed();
            rep.solve_time = Some(prep + iter);
            Ok((rep, None, prep, iter))
        }
        Method::CdAdmm => {
            let t0 = Instant::now();
            let solver = prepare_with(prob, cfg.rho, cfg.path)?;
            let prep = t0.elapsed();
            let t1 = Instant::now();
            let mut rep = admm::solve(prob, cfg, &solver)?;
            let iter = t1.elapsed();
            rep.solve_time = Some(prep + iter);
            let path = format!("{:?}", solver.path()).to_lowercase();
            Ok((rep, Some(path), prep, iter))
        }
        Method::Oracle => unreachable!("the oracle is not an ADMM variant"),
    }
}

pub fn cmd_solve(cmd: &SolveCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    if cmd.method == Method::Oracle && cmd.trace.is_some() {
        return Err(CliError::Usage("--trace needs an ADMM method".into()));
    }
    let (data, desc) = load_instance(cmd)?;
    let prob = compile(&data)?;

    let record = if cmd.method == Method::Oracle {
        let t0 = Instant::now();
        let sol = solve_trs(&prob)?;
        let elapsed = t0.elapsed().as_secs_f64();
        let certified = check_kkt(&prob, &sol.r_star, 1e-8).is_ok();
        RunRecord::from_oracle(desc, &sol, certified, recovered(&prob, &sol.r_star), elapsed)
    } else {
        let mut cfg = cmd.solver.config();
        cfg.record_trace = cmd.trace.is_some();
        let (rep, path, prep, iter) = run_admm(&prob, cmd.method, &cfg)?;
        if let (Some(trace_path), Some(trace)) = (&cmd.trace, &rep.trace) {
            let rows: Vec<TraceRow> = trace
                .iter()
                .map(|t| TraceRow { iter: t.iter, r_pri: t.r_pri, r_dual: t.r_dual, objective: t.objective })
                .collect();
            write_table(trace_path, &rows)?;
        }
        let mut record = RunRecord::from_admm(
            desc,
            cmd.method,
            cmd.solver.echo(),
            &rep,
            path,
            prep.as_secs_f64(),
            iter.as_secs_f64(),
        );
        if cmd.vs_oracle {
            record.attach_oracle(solve_trs(&prob)?.objective);
        }
        record
    };
    print_json(out, &record)?;
    Ok(if record.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| CliError::Usage(format!("bad {what} {s:?}: {e}"))))
        .collect()
}

fn parse_sizes(text: &str) -> Result<Vec<(usize, usize)>, CliError> {
    text.split(',')
        .map(|cell| {
            let (m, n) = cell
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| CliError::Usage(format!("size {cell:?} is not MxN")))?;
            let parse = |s: &str| s.parse::<usize>().map_err(|e| CliError::Usage(format!("bad size {cell:?}: {e}")));
            Ok((parse(m)?, parse(n)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Cell {
    m: usize,
    n: usize,
    gamma: f64,
    scenario: ScenarioArg,
}

fn grid_cells(grid: &GridArgs) -> Result<Vec<Cell>, CliError> {
    let sizes = parse_sizes(&grid.sizes)?;
    let gammas: Vec<f64> = parse_list(&grid.gammas, "gamma")?;
    let mut cells = Vec::new();
    for &(m, n) in &sizes {
        for &gamma in &gammas {
            for &scenario in &grid.scenarios {
                cells.push(Cell { m, n, gamma, scenario });
            }
        }
    }
    Ok(cells)
}

fn cell_spec(grid: &GridArgs, cell: &Cell, seed: u64) -> GenSpec {
    GenSpec {
        density: grid.density,
        noise_sigma: grid.noise_sigma,
        gamma: cell.gamma,
        scenario: scenario(cell.scenario),
        ..GenSpec::new(cell.m, cell.n, seed)
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("{THREADS_ENV}={value:?}: {e}")))?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Default)]
struct MethodStats {
    rel: Vec<f64>,
    iterations: Vec<f64>,
    factorizations: Vec<f64>,
    times: Vec<f64>,
    converged: usize,
    failure: Option<String>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn compare_cell(cmd: &CompareCmd, cell: &Cell) -> Vec<CompareRow> {
    let cfg = cmd.solver.config();
    let mut stats: Vec<MethodStats> = cmd.methods.iter().map(|_| MethodStats::default()).collect();
    let mut oracle_times = Vec::new();
    let mut cell_status: Option<(&str, String)> = None;

    'trials: for t in 0..cmd.trials {
        let seed = cmd.grid.seed + t as u64;
        let prob = match generate(&cell_spec(&cmd.grid, cell, seed)).and_then(|d| compile(&d)) {
            Ok(p) => p,
            Err(e) => {
                cell_status = Some(("failed", e.to_string()));
                break;
            }
        };
        let t0 = Instant::now();
        let oracle = match solve_trs(&prob) {
            Ok(o) => o,
            Err(e @ Error::DimensionTooLarge { .. }) => {
                cell_status = Some(("skipped", e.to_string()));
                break 'trials;
            }
            Err(e) => {
                cell_status = Some(("failed", format!("oracle: {e}")));
                break 'trials;
            }
        };
        oracle_times.push(t0.elapsed().as_secs_f64());
        for (k, &method) in cmd.methods.iter().enumerate() {
            let st = &mut stats[k];
            if st.failure.is_some() {
                continue;
            }
            let outcome = if method == Method::Oracle {
                Ok((oracle.objective, 0, 0, true, oracle_times[oracle_times.len() - 1]))
            } else {
                run_admm(&prob, method, &cfg).map(|(rep, _, prep, iter)| {
                    (rep.objective, rep.iterations, rep.factorizations, rep.converged, (prep + iter).as_secs_f64())
                })
            };
            match outcome {
                Ok((f, iterations, factorizations, converged, time)) => {
                    st.rel.push(rel_err(f, oracle.objective));
                    st.iterations.push(iterations as f64);
                    st.factorizations.push(factorizations as f64);
                    st.times.push(time);
                    st.converged += converged as usize;
                }
                Err(e) => st.failure = Some(format!("trial {t}: {e}")),
            }
        }
    }

    cmd.methods
        .iter()
        .zip(stats)
        .map(|(&method, st)| {
            let (status, message) = match (&cell_status, &st.failure) {
                (Some((s, msg)), _) => (s.to_string(), Some(msg.clone())),
                (None, Some(msg)) => ("failed".to_string(), Some(msg.clone())),
                (None, None) => ("ok".to_string(), None),
            };
            let ok = status == "ok";
            CompareRow {
                m: cell.m,
                n: cell.n,
                density: cmd.grid.density,
                gamma: cell.gamma,
                scenario: cell.scenario.name().into(),
                method,
                status,
                message,
                trials: if ok { st.rel.len() } else { 0 },
                converged: st.converged,
                rel_err_avg: ok.then(|| mean(&st.rel)).flatten(),
                rel_err_min: ok.then(|| st.rel.iter().copied().reduce(f64::min)).flatten(),
                rel_err_max: ok.then(|| st.rel.iter().copied().reduce(f64::max)).flatten(),
                iterations_avg: ok.then(|| mean(&st.iterations)).flatten(),
                factorizations_avg: ok.then(|| mean(&st.factorizations)).flatten(),
                time_avg: ok.then(|| mean(&st.times)).flatten(),
                oracle_time_avg: ok.then(|| mean(&oracle_times)).flatten(),
            }
        })
        .collect()
}

pub fn cmd_compare(cmd: &CompareCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    if cmd.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    cmd.solver.config().validate()?;
    let cells = grid_cells(&cmd.grid)?;
    let pool = thread_pool()?;
    let rows: Vec<CompareRow> =
        pool.install(|| cells.par_iter().map(|cell| compare_cell(cmd, cell)).collect::<Vec<_>>()).concat();
    if let Some(path) = &cmd.grid.out {
        write_table(path, &rows)?;
    }
    print_json(out, &rows)?;
    Ok(EXIT_OK)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn bench_cell(cmd: &BenchCmd, cell: &Cell) -> Result<BenchRow, CliError> {
    let cfg = cmd.solver.config();
    let prob = compile(&generate(&cell_spec(&cmd.grid, cell, cmd.grid.seed))?)?;
    let (mut ap, mut ai, mut cp, mut ci, mut ot) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut admm_iters, mut cd_iters, mut cd_factorizations, mut cd_path) = (0, 0, 0, String::new());
    for _ in 0..cmd.repeats {
        let (rep, _, prep, iter) = run_admm(&prob, Method::Admm, &cfg)?;
        ap.push(prep.as_secs_f64());
        ai.push(iter.as_secs_f64());
        admm_iters = rep.iterations;
        let (rep, path, prep, iter) = run_admm(&prob, Method::CdAdmm, &cfg)?;
        cp.push(prep.as_secs_f64());
        ci.push(iter.as_secs_f64());
        cd_iters = rep.iterations;
        cd_factorizations = rep.factorizations;
        cd_path = path.unwrap_or_default();
        if cmd.with_oracle && prob.dim() <= spgls_core::oracle::DENSE_LIMIT {
            let t0 = Instant::now();
            solve_trs(&prob)?;
            ot.push(t0.elapsed().as_secs_f64());
        }
    }
    let (admm_prepare, admm_iterate) = (median(ap.clone()), median(ai.clone()));
    let (cd_prepare, cd_iterate) = (median(cp.clone()), median(ci.clone()));
    let admm_total = median(ap.iter().zip(&ai).map(|(a, b)| a + b).collect());
    let cd_total = median(cp.iter().zip(&ci).map(|(a, b)| a + b).collect());
    let oracle_total = (!ot.is_empty()).then(|| median(ot));
    Ok(BenchRow {
        m: cell.m,
        n: cell.n,
        density: cmd.grid.density,
        gamma: cell.gamma,
        repeats: cmd.repeats,
        admm_prepare,
        admm_iterate,
        admm_total,
        admm_iterations: admm_iters,
        cd_prepare,
        cd_iterate,
        cd_total,
        cd_iterations: cd_iters,
        cd_factor_path: cd_path,
        cd_factorizations,
        oracle_total,
        ratio1: oracle_total.map(|o| o / cd_total),
        ratio2: admm_total / cd_total,
    })
}

/// Timing runs are sequential so that cells do not compete for cores.
pub fn cmd_bench(cmd: &BenchCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    if cmd.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    cmd.solver.config().validate()?;
    let cells = grid_cells(&cmd.grid)?;
    let rows = cells.iter().map(|c| bench_cell(cmd, c)).collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &cmd.grid.out {
        write_table(path, &rows)?;
    }
    print_json(out, &rows)?;
    Ok(EXIT_OK)
}
