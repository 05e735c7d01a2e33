//! Command-line entry points.
//!
//! Subcommands:
//!
//! * `fit`: fit a model to a CSV file and write a JSON report (or a CSV
//!   coefficient table with `--format csv`);
//! * `predict-g`: refit from data and configuration and evaluate `ĝ`;
//! * `simulate`: run the Monte Carlo study and write `summary.json`,
//!   `table1.csv` and `table2.csv` into a directory;
//! * `basis-dump`: write B-spline basis values on a 500-point grid.
//!
//! Exit status: 0 on success, 2 for invalid input or configuration, 3 for a
//! numerical or model failure, 4 for an internal error. Output files are
//! written atomically, so an error exit leaves no partial output.
//!
//! `PLMSCAD_THREADS` caps the worker threads used for simulation replicates;
//! 0 or unset lets the pool choose.

mod input;
mod output;
mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PlmError;
use crate::exec::Execution;
use crate::penalty::{PenaltyFamily, DEFAULT_SCAD_A};
use crate::plm::{fit_plm, FitConfig, LambdaGrid};
use crate::simulation::{simulate, EstimatorKind, GScenario, ScenarioSpec, RNG_ALGORITHM};
use crate::spline::{make_quantile_partition, KnotPartition, SplineBasis};

pub use input::{read_dataset, read_table, Table};
pub use output::{write_all_atomic, write_atomic, Sink};
pub use report::{
    basis_dump_csv, display_estimate, table1_csv, table2_csv, CoefficientReport, FitReport, GridPoint,
    PredictReport, SimMetadata, SimulationReport, SplineReport, BASIS_DUMP_POINTS, FIT_GRID_POINTS,
    SCHEMA_VERSION,
};

/// Environment variable capping the replicate worker threads.
pub const THREADS_ENV: &str = "PLMSCAD_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// A failure carrying its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<PlmError> for CliError {
    fn from(e: PlmError) -> Self {
        let code = match e {
            PlmError::InvalidPartition(_)
            | PlmError::OutOfDomain { .. }
            | PlmError::Dimension(_)
            | PlmError::Config(_)
            | PlmError::Domain(_) => EXIT_INPUT,
            PlmError::SolverFailure { .. }
            | PlmError::Divergence { .. }
            | PlmError::DegenerateColumn { .. }
            | PlmError::GcvUndefined { .. }
            | PlmError::Numerical(_) => EXIT_NUMERICAL,
            PlmError::Internal(_) => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "plmscad", version, about = "Sparse partially linear models by SCAD-penalized profile least squares")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to CSV data and write a report.
    Fit(FitArgs),
    /// Refit from data and evaluate the estimated nonparametric component.
    PredictG(PredictArgs),
    /// Run the seeded Monte Carlo study.
    Simulate(SimulateArgs),
    /// Write B-spline basis values on a 500-point grid.
    BasisDump(BasisDumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Scad,
    Lasso,
    None,
}

impl From<PenaltyArg> for PenaltyFamily {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Scad => PenaltyFamily::Scad,
            PenaltyArg::Lasso => PenaltyFamily::Lasso,
            PenaltyArg::None => PenaltyFamily::None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    pub response: String,
    /// Name of the column entering the model nonparametrically.
    #[arg(long)]
    pub nonparam: String,
    /// Columns to ignore (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// B-spline order (4 = cubic).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Number of interior knots, placed at sample quantiles.
    #[arg(long, default_value_t = 3)]
    pub knots: usize,
    /// Penalty family; `none` fits the unpenalized model.
    #[arg(long, value_enum, default_value_t = PenaltyArg::Scad)]
    pub penalty: PenaltyArg,
    /// SCAD shape parameter.
    #[arg(long, default_value_t = DEFAULT_SCAD_A)]
    pub a: f64,
    /// `auto` or a comma-separated list of penalty levels.
    #[arg(long, default_value = "auto")]
    pub lambda_grid: String,
}

impl ModelArgs {
    pub fn to_config(&self) -> Result<FitConfig, CliError> {
        let config = FitConfig {
            spline_order: self.order,
            interior_knots: self.knots,
            penalty_family: self.penalty.into(),
            a: self.a,
            lambda_grid: parse_lambda_grid(&self.lambda_grid)?,
            ..FitConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// `json` writes the full report, `csv` the coefficient table.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fit configuration as JSON (the `config` object of a fit report, or a
    /// whole fit report). Overrides the model flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Evaluation points (comma separated); a 200-point grid over the range
    /// of the nonparametric column when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Vec<f64>,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// `csv` writes `t,g_hat` rows, `json` a small report.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario numbers: 1 for g(t) = cos t, 2 for g(t) = cos 2πt.
    #[arg(long, value_delimiter = ',')]
    pub scenario: Vec<u8>,
    /// Correlation levels of the covariate errors.
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    /// Sample size per replicate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Replicates per scenario and correlation level.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Master seed; replicate k draws from stream k of this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Estimators to run: ls_scad, plm, plm_aic, plm_lasso, plm_scad.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<String>,
    /// Interior knots for the spline fits.
    #[arg(long)]
    pub knots: Option<usize>,
    /// JSON configuration file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving summary.json, table1.csv and table2.csv.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BasisDumpArgs {
    /// B-spline order (4 = cubic).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Number of interior knots.
    #[arg(long, default_value_t = 3)]
    pub knots: usize,
    /// Domain bounds for equally spaced knots.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub upper: f64,
    /// Take quantile knots and the domain from this CSV instead.
    #[arg(long, requires = "nonparam")]
    pub input: Option<PathBuf>,
    /// Column of the input CSV supplying the quantiles.
    #[arg(long, requires = "input")]
    pub nonparam: Option<String>,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Default seed of the simulation study.
pub const DEFAULT_SEED: u64 = 1234;

/// Fully resolved simulation configuration; hashed into the metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub scenarios: Vec<u8>,
    pub rhos: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub fit: FitConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![1],
            rhos: vec![0.0],
            n: 100,
            replicates: 100,
            seed: DEFAULT_SEED,
            estimators: EstimatorKind::ALL.to_vec(),
            fit: FitConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn specs(&self) -> Result<Vec<ScenarioSpec>, CliError> {
        if self.scenarios.is_empty() || self.rhos.is_empty() {
            return Err(CliError::input("at least one scenario and one rho are required"));
        }
        let mut specs = Vec::new();
        for &k in &self.scenarios {
            let g = GScenario::from_number(k)?;
            for &rho in &self.rhos {
                let spec = ScenarioSpec {
                    n: self.n,
                    p: 10,
                    rho,
                    g_scenario: g,
                    replicates: self.replicates,
                    seed: self.seed,
                    estimators: self.estimators.clone(),
                };
                spec.validate()?;
                specs.push(spec);
            }
        }
        self.fit.validate()?;
        Ok(specs)
    }

    /// SHA-256 over the canonical JSON of this configuration.
    pub fn hash(&self) -> Result<String, CliError> {
        let canonical = serde_json::to_vec(self).map_err(|e| CliError::internal(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(&canonical)))
    }
}

pub fn parse_lambda_grid(text: &str) -> Result<LambdaGrid, CliError> {
    let trimmed = text.trim();
    if trimmed.eq_ignore_ascii_case("auto") {
        return Ok(LambdaGrid::default());
    }
    let values = trimmed
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("lambda grid entry '{}' is not a number", v.trim())))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(CliError::input("lambda grid values must be finite and nonnegative"));
    }
    Ok(LambdaGrid::Explicit(values))
}

/// Reads `PLMSCAD_THREADS`; `None` means let the pool decide.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::input(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(k) => Ok(Some(k)),
            Err(_) => Err(CliError::input(format!("{THREADS_ENV} must be a nonnegative integer, got '{v}'"))),
        },
    }
}

/// Runs `work` with at most `threads` workers.
fn with_thread_cap<T: Send>(threads: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    #[cfg(feature = "parallel")]
    if let Some(k) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::internal(format!("cannot start worker pool: {e}")))?;
        return Ok(pool.install(work));
    }
    let _ = threads;
    Ok(work())
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let config = args.model.to_config()?;
    let data = read_dataset(&args.data.input, &args.data.response, &args.data.nonparam, &args.data.exclude)?;
    let fit = fit_plm(&data, &config)?;
    let report = FitReport::new(
        &fit,
        &report::FitContext {
            input: &args.data.input.display().to_string(),
            response: &args.data.response,
            nonparam: &args.data.nonparam,
            config: &config,
            nonparam_values: data.nonparam(),
        },
    )?;
    let bytes = match args.format {
        Format::Json => report::to_json(&report)?,
        Format::Csv => report.coefficients_csv()?,
    };
    Sink::from_arg(args.output.as_deref()).write(&bytes)
}

/// Accepts either a bare fit configuration or a document with a `config` field.
fn load_fit_config(path: &Path) -> Result<FitConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{} is not valid JSON: {e}", path.display())))?;
    let inner = value.get("config").cloned().unwrap_or(value);
    let config: FitConfig = serde_json::from_value(inner)
        .map_err(|e| CliError::input(format!("{} is not a fit configuration: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn cmd_predict_g(args: &PredictArgs) -> Result<(), CliError> {
    let config = match &args.config {
        Some(path) => load_fit_config(path)?,
        None => args.model.to_config()?,
    };
    let data = read_dataset(&args.data.input, &args.data.response, &args.data.nonparam, &args.data.exclude)?;
    let fit = fit_plm(&data, &config)?;
    let points: Vec<GridPoint> = if args.at.is_empty() {
        fit.g_grid(FIT_GRID_POINTS)?
            .into_iter()
            .map(|(t, g_hat)| GridPoint { t, g_hat })
            .collect()
    } else {
        args.at
            .iter()
            .map(|&t| Ok(GridPoint { t, g_hat: fit.predict_g(t)? }))
            .collect::<Result<_, CliError>>()?
    };
    let report = PredictReport {
        schema_version: SCHEMA_VERSION.into(),
        command: "predict-g".into(),
        input: args.data.input.display().to_string(),
        lambda_chosen: fit.lambda_chosen,
        points,
    };
    let bytes = match args.format {
        Format::Json => report::to_json(&report)?,
        Format::Csv => report.csv()?,
    };
    Sink::from_arg(args.output.as_deref()).write(&bytes)
}

pub fn resolve_simulation_config(args: &SimulateArgs) -> Result<SimulationConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("{} is not a simulation configuration: {e}", path.display())))?
        }
        None => SimulationConfig::default(),
    };
    if !args.scenario.is_empty() {
        config.scenarios = args.scenario.clone();
    }
    if !args.rho.is_empty() {
        config.rhos = args.rho.clone();
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(k) = args.knots {
        config.fit.interior_knots = k;
    }
    if !args.estimators.is_empty() {
        config.estimators = args
            .estimators
            .iter()
            .map(|s| s.parse::<EstimatorKind>())
            .collect::<crate::Result<_>>()?;
    }
    Ok(config)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = resolve_simulation_config(args)?;
    let specs = config.specs()?;
    if !args.output.is_dir() {
        return Err(CliError::input(format!(
            "output directory {} does not exist",
            args.output.display()
        )));
    }

    let fit = config.fit.clone();
    let cells = specs
        .iter()
        .map(|spec| simulate(spec, &fit, Execution::Parallel))
        .collect::<crate::Result<Vec<_>>>()?;

    let generated_at_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let report = SimulationReport {
        metadata: SimMetadata {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            rng_algorithm: RNG_ALGORITHM.into(),
            config_hash: config.hash()?,
            generated_at_unix,
        },
        config,
        cells,
    };
    let files = vec![
        (args.output.join("summary.json"), report::to_json(&report)?),
        (args.output.join("table1.csv"), table1_csv(&report.cells)?),
        (args.output.join("table2.csv"), table2_csv(&report.cells)?),
    ];
    write_all_atomic(&files)
}

pub fn cmd_basis_dump(args: &BasisDumpArgs) -> Result<(), CliError> {
    let partition = match (&args.input, &args.nonparam) {
        (Some(path), Some(column)) => {
            let table = read_table(path, Some(std::slice::from_ref(column)))?;
            make_quantile_partition(&table.columns[0], args.knots)?
        }
        _ => KnotPartition::uniform(args.lower, args.upper, args.knots)?,
    };
    let basis = SplineBasis::new(args.order, partition)?;
    let bytes = basis_dump_csv(&basis, BASIS_DUMP_POINTS)?;
    Sink::from_arg(args.output.as_deref()).write(&bytes)
}

/// Runs the command inside a worker pool sized by `PLMSCAD_THREADS`.
pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let threads = thread_cap()?;
    with_thread_cap(threads, || match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::PredictG(a) => cmd_predict_g(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::BasisDump(a) => cmd_basis_dump(a),
    })?
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = std::panic::catch_unwind(|| dispatch(&cli));
    match outcome {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.code
        }
        Err(_) => {
            eprintln!("error: internal failure");
            EXIT_INTERNAL
        }
    }
}
