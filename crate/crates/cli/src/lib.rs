//! Command-line front end for `frtpp`.
//!
//! [`run`] parses arguments and returns the process exit code: 0 on success
//! (including `--help`), 1 for usage and validation errors, 2 for runtime
//! failures such as unreadable files or tests with no usable draws.

pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use frtpp_core::sim::{results_from_csv, results_to_csv};
use frtpp_core::{
    derive_stream, generate, run_grid_with, run_tests_observed, Alternative, ChainConfig, ComplianceLevels, FrtError,
    GibbsError, GridSpec, ImputationPosture, Method, ObservedDataset, Predictiveness, ScenarioConfig, SimError,
    TestKind, TestOptions, TraceWriter,
};
use report::{Figure, FigureSpec, ReportError};

const GRID_HELP: &str = "\
Grid files are flat `key = value` lines; `#` starts a comment and lists are
comma separated. Keys not given keep their defaults:
  predictiveness    = none, medium, high
  compliance_levels = share            (share | nominal)
  eta_c0            = -3, -2, -1, -0.5, 0, 0.5, 1, 2, 3
  hypotheses        = H0, H1
  methods           = m1-stat, m1-disc, ..., m4-disc, model, model_x
  misspecified      = false
  replications      = 200
  iterations        = 1000
  burn_in           = 500
  alpha_level       = 0.05
  workers           = 1
  n                 = 500
  n_t               = 250";

#[derive(Debug, Parser)]
#[command(name = "frtpp", version, about = "Randomization tests with imputed compliance for one-sided noncompliance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one synthetic experiment and write it as CSV.
    Generate(GenerateArgs),
    /// Compute one p-value for a dataset.
    Test(TestArgs),
    /// Run a simulation grid and write rejection rates.
    #[command(after_help = GRID_HELP)]
    Simulate(SimulateArgs),
    /// Render a results CSV as a table and an SVG chart.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// How strongly the covariate predicts compliance: none, medium or high.
    #[arg(long, default_value = "none")]
    predictiveness: Predictiveness,
    /// Intercept rule: `share` (30% compliers at every level) or `nominal`.
    #[arg(long, default_value = "share")]
    levels: ComplianceLevels,
    /// Mean control outcome of compliers; never-takers have mean 0.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    eta_c0: f64,
    /// Constant complier effect.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tau: f64,
    /// Number of units.
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Number of units assigned to treatment.
    #[arg(long, default_value_t = 250)]
    n_t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV (`z,d,y,x`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional sidecar with true compliance and both potential outcomes.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Dataset CSV with columns `z,d,y` and optionally `x`.
    #[arg(long)]
    data: PathBuf,
    /// Imputation method: m1 (null), m2 (unconstrained), m3 (null, covariate), m4 (covariate).
    #[arg(long)]
    method: String,
    /// Test quantity: stat (IV statistic), disc (complier discrepancy) or model (posterior test).
    #[arg(long, default_value = "disc")]
    kind: TestKind,
    /// Total Gibbs iterations.
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    /// Iterations discarded before p-value draws are kept.
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level for the reject/retain note on stderr.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Impute under a model that forces equal complier and never-taker means.
    #[arg(long)]
    misspecified: bool,
    /// Two-sided p-value instead of the one-sided default.
    #[arg(long)]
    two_sided: bool,
    /// Write the chain trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Grid file; the full default grid when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Base seed for every stream in the run.
    #[arg(long)]
    seed: u64,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the grid file).
    #[arg(long)]
    workers: Option<usize>,
    /// Append finished cells here and skip cells already present.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// 2000 replications and chains of 2000 iterations with 1000 burn-in.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Results CSV; repeat to combine runs (for example correct and misspecified).
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// fig1..fig3 (imputation methods at none/medium/high predictiveness) or fig4..fig6 (with model-based tests).
    #[arg(long)]
    figure: Figure,
    /// SVG output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table output path; stdout when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Comma-separated series ids such as `m2-disc,model`; the figure's defaults when omitted.
    #[arg(long, value_delimiter = ',')]
    series: Option<Vec<String>>,
    /// Height of the reference line.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

impl From<FrtError> for CliError {
    fn from(e: FrtError) -> Self {
        match e {
            FrtError::PostureViolation
            | FrtError::LengthMismatch
            | FrtError::Gibbs(GibbsError::MissingCovariate | GibbsError::Config(_)) => validation(e),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::ChecksumMismatch { .. } | SimError::Results { .. } => validation(e),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        validation(e)
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let cfg = ScenarioConfig {
        n: a.n,
        n_t: a.n_t,
        predictiveness: a.predictiveness,
        levels: a.levels,
        eta_c0: a.eta_c0,
        tau: a.tau,
        ..ScenarioConfig::default()
    };
    let (data, truth) = generate(&cfg, &mut derive_stream(a.seed, "generate")).map_err(validation)?;
    match &a.out {
        Some(path) => write(path, &data.to_csv_string())?,
        None => print!("{}", data.to_csv_string()),
    }
    if let Some(path) = &a.truth {
        write(path, &truth.to_csv_string())?;
    }
    Ok(())
}

fn cmd_test(a: TestArgs) -> Result<(), CliError> {
    let method = Method::from_ids(&a.method, a.kind.as_str()).map_err(validation)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(validation(format!("alpha must lie in (0,1), got {}", a.alpha)));
    }
    let chain = ChainConfig::new(a.iterations, a.burn_in, a.seed).map_err(validation)?;
    let data = ObservedDataset::from_csv_str(&read(&a.data)?).map_err(validation)?;
    let posture: ImputationPosture = method.posture(a.misspecified);
    let options = TestOptions {
        alternative: if a.two_sided { Alternative::TwoSided } else { Alternative::Greater },
        ..TestOptions::default()
    };

    let mut trace = a.trace.as_ref().map(|_| TraceWriter::default());
    let mut out =
        run_tests_observed(&data, &posture, &[method.kind()], &chain, &options, &derive_stream(a.seed, "test"), |s| {
            if let Some(t) = trace.as_mut() {
                t.record(&data, s);
            }
        })?;
    if let (Some(path), Some(t)) = (&a.trace, trace) {
        write(path, &t.into_string())?;
    }
    let result = out.pop().expect("one kind requested")?;
    println!("{:?},{},{},{}", result.p_value, result.kind, a.method, result.degenerate_draws);
    eprintln!("{} H0 at alpha={}", if result.rejects(a.alpha) { "reject" } else { "retain" }, a.alpha);
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut grid = match &a.grid {
        Some(path) => GridSpec::parse(&read(path)?).map_err(validation)?,
        None => GridSpec::default(),
    };
    grid.base_seed = a.seed;
    if a.full_scale {
        grid.replications = 2000;
        grid.chain = ChainConfig::new(2000, 1000, 0).map_err(validation)?;
    }
    if let Some(w) = a.workers {
        grid.worker_count = w;
    }
    let outcome = run_grid_with(&grid, a.checkpoint.as_deref(), None)?;
    let csv = results_to_csv(&outcome.summaries);
    match &a.out {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    if outcome.failed_cells > 0 {
        eprintln!("{} replications produced no p-value and were left out of the rates", outcome.failed_cells);
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in &a.inputs {
        rows.extend(results_from_csv(&read(path)?).map_err(|e| validation(format!("{}: {e}", path.display())))?);
    }
    let mut spec = FigureSpec::new(a.figure);
    spec.alpha_level = a.alpha;
    if let Some(ids) = a.series {
        spec.series =
            ids.iter().filter(|s| !s.is_empty()).map(|s| s.parse()).collect::<Result<_, _>>().map_err(validation)?;
    }
    let r = report::report(&rows, &spec)?;
    if let Some(path) = &a.out {
        write(path, &r.svg)?;
    }
    match &a.table {
        Some(path) => write(path, &r.table)?,
        None => print!("{}", r.table),
    }
    Ok(())
}
