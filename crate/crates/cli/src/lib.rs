//! Command-line front-end for robust local GP regression.
//!
//! Three subcommands share one code path for loading and fitting:
//!
//! - `predict`: for every test row, select the nearest training rows, fit,
//!   and write the predictive mean and variance.
//! - `outliers`: same fits, but write the training rows flagged by `γ̂`.
//! - `bench`: run a synthetic benchmark described by a `key = value` file.
//!
//! Output files are written to a temporary file in the destination directory
//! and renamed into place. Exit codes: 0 success, 1 runtime failure, 2 config
//! error, 3 I/O error, 4 schema error.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use rlgp::estimator::{fit, C0Mode, EstimatorConfig, FittedLocalModel, QMode};
use rlgp::neighborhood::{load_dataset, select_neighbors, CsvSchema, Dataset, MinMaxScaler, DEFAULT_NEIGHBORS};
use rlgp::predictor::predict;
use rlgp::synthbench::{run_benchmark, BenchConfig, BenchReport};
use rlgp::RlgpError;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn in_file(path: &Path, err: RlgpError) -> Self {
        let msg = format!("{}: {err}", path.display());
        match err {
            RlgpError::Io(_) => CliError::Io(msg),
            RlgpError::Schema(_)
            | RlgpError::Parse { .. }
            | RlgpError::NoRows
            | RlgpError::DimensionMismatch { .. } => CliError::Schema(msg),
            RlgpError::Config(_) | RlgpError::InvalidArgument(_) => CliError::Config(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

impl From<RlgpError> for CliError {
    fn from(err: RlgpError) -> Self {
        match err {
            RlgpError::Io(e) => CliError::Io(e.to_string()),
            RlgpError::Config(m) | RlgpError::InvalidArgument(m) => CliError::Config(m),
            e @ (RlgpError::Schema(_)
            | RlgpError::Parse { .. }
            | RlgpError::NoRows
            | RlgpError::DimensionMismatch { .. }) => CliError::Schema(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rlgp", version, about = "Robust local Gaussian process regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predictive mean and variance for every test row.
    Predict(RunArgs),
    /// Training rows flagged as outliers in each test row's neighborhood.
    Outliers(RunArgs),
    /// Synthetic benchmark from a config file.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum C0Arg {
    One,
    Corrected,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Training CSV with header x1,...,xd,y.
    #[arg(long)]
    pub train: PathBuf,
    /// Test CSV with the same header as the training file.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    pub neighbors: usize,
    /// `adaptive`, an integer count, or a fraction such as `0.15n`.
    #[arg(long, default_value = "adaptive")]
    pub q: String,
    #[arg(long, default_value_t = 3.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = C0Arg::One)]
    pub c0: C0Arg,
    /// Accepted for interface symmetry; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Min-max scale inputs to [-0.5, 0.5] using the training ranges.
    #[arg(long)]
    pub scale: bool,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub tol_outer: Option<f64>,
    #[arg(long)]
    pub tol_gamma: Option<f64>,
    /// Record per-row wall-clock seconds instead of writing 0.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Benchmark config (flat key = value text).
    #[arg(long)]
    pub config: PathBuf,
    /// CSV report destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record per-point wall-clock seconds instead of writing 0.
    #[arg(long)]
    pub timing: bool,
}

/// Validated settings for `predict` and `outliers`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub output_path: PathBuf,
    pub neighbors: usize,
    pub estimator: EstimatorConfig,
    pub seed: u64,
    pub scale: bool,
    pub workers: Option<usize>,
    pub timing: bool,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let q_mode: QMode = args.q.parse()?;
        let mut estimator = EstimatorConfig {
            tau: args.tau,
            c0_mode: match args.c0 {
                C0Arg::One => C0Mode::One,
                C0Arg::Corrected => C0Mode::Corrected,
            },
            ..EstimatorConfig::default()
        }
        .with_q(q_mode);
        if let Some(t) = args.tol_outer {
            estimator.tol_outer = t;
        }
        if let Some(t) = args.tol_gamma {
            estimator.tol_gamma = t;
        }
        estimator.validate()?;
        if args.neighbors == 0 {
            return Err(CliError::Config("--neighbors must be at least 1".into()));
        }
        check_workers(args.workers)?;
        Ok(Self {
            train_path: args.train.clone(),
            test_path: args.test.clone(),
            output_path: args.out.clone(),
            neighbors: args.neighbors,
            estimator,
            seed: args.seed,
            scale: args.scale,
            workers: args.workers,
            timing: args.timing,
        })
    }
}

fn check_workers(workers: Option<usize>) -> Result<(), CliError> {
    if workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    Ok(())
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    builder.build().map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `contents` beside `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Fixed 17-significant-digit rendering.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Keeps free text inside one CSV cell.
fn cell_text(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            ',' => ';',
            '"' => '\'',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect()
}

struct Inputs {
    train: Dataset,
    test: Dataset,
    /// Test inputs in fitting coordinates (scaled when requested).
    queries: Vec<Vec<f64>>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let train = load_dataset(open(&cfg.train_path)?, CsvSchema { dim: None })
        .map_err(|e| CliError::in_file(&cfg.train_path, e))?;
    let test = load_dataset(open(&cfg.test_path)?, CsvSchema { dim: Some(train.dim()) })
        .map_err(|e| CliError::in_file(&cfg.test_path, e))?;
    if cfg.neighbors > train.len() {
        return Err(CliError::Config(format!(
            "--neighbors {} exceeds the {} training rows",
            cfg.neighbors,
            train.len()
        )));
    }
    let (train, queries) = if cfg.scale {
        let scaler = MinMaxScaler::fit(&train);
        let queries = (0..test.len()).map(|i| scaler.transform_point(&test.row(i))).collect();
        (scaler.transform(&train)?, queries)
    } else {
        let queries = (0..test.len()).map(|i| test.row(i)).collect();
        (train, queries)
    };
    Ok(Inputs { train, test, queries })
}

struct RowFit {
    model: FittedLocalModel,
    mean: f64,
    variance: f64,
    seconds: f64,
}

fn fit_rows(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<Result<RowFit, String>>, CliError> {
    let run = |query: &Vec<f64>| -> Result<RowFit, String> {
        let start = Instant::now();
        let nb = select_neighbors(&inputs.train, query, cfg.neighbors).map_err(|e| e.to_string())?;
        let model = fit(&nb, &cfg.estimator).map_err(|e| e.to_string())?;
        let pred = predict(&model).map_err(|e| e.to_string())?;
        Ok(RowFit {
            mean: pred.mean,
            variance: pred.variance,
            seconds: start.elapsed().as_secs_f64(),
            model,
        })
    };
    let pool = pool(cfg.workers)?;
    Ok(pool.install(|| inputs.queries.par_iter().map(run).collect()))
}

/// Counts from a `predict` or `outliers` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub rows: usize,
    pub failed: usize,
}

pub fn predict_header(d: usize) -> String {
    let mut cols: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    cols.extend(
        ["pred_mean", "pred_var", "q_used", "n_outliers", "seconds", "error"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

pub const OUTLIERS_HEADER: &str = "test_row,train_row,gamma_value";

/// Fits every test row and writes `x1..xd, pred_mean, pred_var, q_used,
/// n_outliers, seconds, error`. Rows that fail keep their inputs and carry
/// the message in `error`; the numeric cells are left empty.
pub fn cmd_predict(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let inputs = load_inputs(cfg)?;
    let fits = fit_rows(cfg, &inputs)?;
    let mut out = predict_header(inputs.test.dim());
    out.push('\n');
    let mut failed = 0;
    for (i, row) in fits.iter().enumerate() {
        let mut cells: Vec<String> = inputs.test.row(i).into_iter().map(num).collect();
        match row {
            Ok(r) => {
                let seconds = if cfg.timing { r.seconds } else { 0.0 };
                cells.extend([
                    num(r.mean),
                    num(r.variance),
                    r.model.q_used.to_string(),
                    r.model.gamma.support_size().to_string(),
                    num(seconds),
                    String::new(),
                ]);
            }
            Err(msg) => {
                failed += 1;
                cells.extend(["", "", "", "", ""].map(String::from));
                cells.push(cell_text(msg));
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_atomic(&cfg.output_path, out.as_bytes())?;
    Ok(RunSummary { rows: fits.len(), failed })
}

/// Writes one `test_row, train_row, gamma_value` line per flagged training
/// row, using 0-based data-row indices in both files. Rows within a test
/// point are ordered by training index.
pub fn cmd_outliers(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let inputs = load_inputs(cfg)?;
    let fits = fit_rows(cfg, &inputs)?;
    let mut out = String::from(OUTLIERS_HEADER);
    out.push('\n');
    let mut failed = 0;
    for (i, row) in fits.iter().enumerate() {
        match row {
            Ok(r) => {
                let mut flagged = r.model.outliers();
                flagged.sort_by_key(|(idx, _)| *idx);
                for (idx, g) in flagged {
                    out.push_str(&format!("{i},{idx},{}\n", num(g)));
                }
            }
            Err(msg) => {
                failed += 1;
                eprintln!("test row {i}: {msg}");
            }
        }
    }
    write_atomic(&cfg.output_path, out.as_bytes())?;
    Ok(RunSummary { rows: fits.len(), failed })
}

/// Parses the config (before any computation), runs the benchmark, writes
/// the CSV report, and returns it.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    check_workers(args.workers)?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut cfg = BenchConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.timing |= args.timing;
    let report = pool(args.workers)?.install(|| run_benchmark(&cfg))?;
    write_atomic(&args.out, report.to_csv().as_bytes())?;
    Ok(report)
}

/// Runs a parsed command line, printing summaries to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let say = |w: &mut dyn Write, s: String| {
        w.write_all(s.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))
    };
    match cli.command {
        Command::Predict(args) => {
            let s = cmd_predict(&RunConfig::from_args(&args)?)?;
            say(stdout, format!("predicted {} rows ({} failed) -> {}\n", s.rows, s.failed, args.out.display()))
        }
        Command::Outliers(args) => {
            let s = cmd_outliers(&RunConfig::from_args(&args)?)?;
            say(stdout, format!("scanned {} rows ({} failed) -> {}\n", s.rows, s.failed, args.out.display()))
        }
        Command::Bench(args) => {
            let report = cmd_bench(&args)?;
            say(stdout, report.to_table())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit
/// status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rlgp: {e}");
            e.exit_code()
        }
    }
}
