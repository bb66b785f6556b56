//! Seeded benchmark sweeps over synthetic scenarios.
//!
//! A config is flat `key = value` text:
//!
//! ```text
//! # d = 10 partitioned surface
//! scenario = partition
//! d = 10
//! n_test = 200
//! seed = 7
//! methods = rlgp, rlgp:0.1n, localgp, median
//! ```
//!
//! Recognized keys: `preset`, `scenario`, `d`, `n_train`, `n_test`, `seed`,
//! `methods`, `q_mode`, `tau`, `neighbors`, `timing`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::partition::{sample_partitioned_gp, PartitionSpec};
use super::scenarios::{boundary_scenarios, BoundaryKind};
use crate::error::{Result, RlgpError};
use crate::estimator::{fit, EstimatorConfig, QMode};
use crate::neighborhood::{select_neighbors, Dataset, DEFAULT_NEIGHBORS};
use crate::predictor::{crps_gaussian, predict};
use crate::stats::{median, variance};

pub const PRESET_DIMS: [usize; 6] = [2, 10, 25, 50, 100, 500];
pub const MAX_TEST_POINTS: usize = 1000;

pub const BENCH_CSV_HEADER: &str =
    "scenario,method,d,n_train,n_test,seed,mse,mae,crps,mean_seconds,n_points,n_failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Two-region partitioned GP in `d` dimensions.
    Partition,
    /// One 2-D boundary scenario, replicated over `n_test` noise seeds.
    Boundary(BoundaryKind),
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Partition => "partition",
            ScenarioKind::Boundary(kind) => kind.name(),
        }
    }

    /// Parses one scenario name; `boundary` expands to all three 2-D cases.
    pub fn parse_list(s: &str) -> Result<Vec<ScenarioKind>> {
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match name {
                "partition" => out.push(ScenarioKind::Partition),
                "boundary" => out.extend(BoundaryKind::ALL.map(ScenarioKind::Boundary)),
                other => {
                    let kind = BoundaryKind::ALL
                        .into_iter()
                        .find(|k| k.name() == other)
                        .ok_or_else(|| RlgpError::Config(format!("unknown scenario {other:?}")))?;
                    out.push(ScenarioKind::Boundary(kind));
                }
            }
        }
        if out.is_empty() {
            return Err(RlgpError::Config("no scenario given".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Robust local GP; `None` uses the config's `q_mode`.
    Rlgp(Option<QMode>),
    /// Local GP without outlier terms (`q = 0`).
    LocalGp,
    /// Global median of the training responses.
    Median,
}

impl FromStr for Method {
    type Err = RlgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rlgp" => Ok(Method::Rlgp(None)),
            "localgp" => Ok(Method::LocalGp),
            "median" => Ok(Method::Median),
            _ => match s.strip_prefix("rlgp:") {
                Some(spec) => Ok(Method::Rlgp(Some(spec.parse()?))),
                None => Err(RlgpError::Config(format!("unknown method {s:?}"))),
            },
        }
    }
}

fn q_label(q: QMode) -> String {
    match q {
        QMode::Adaptive => "adaptive".into(),
        QMode::Count(k) => k.to_string(),
        QMode::Fraction(a) => format!("{a}n"),
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Rlgp(None) => f.write_str("rlgp"),
            Method::Rlgp(Some(q)) => write!(f, "rlgp:{}", q_label(*q)),
            Method::LocalGp => f.write_str("localgp"),
            Method::Median => f.write_str("median"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scenarios: Vec<ScenarioKind>,
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub q_mode: QMode,
    pub tau: f64,
    pub neighbors: usize,
    /// Record wall-clock times; off by default so reports are reproducible
    /// byte for byte.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self::preset(2).expect("2 is a preset dimension")
    }
}

impl BenchConfig {
    /// Partitioned-surface preset: `n_train = 10d`, 200 test points,
    /// neighborhoods of 50.
    pub fn preset(d: usize) -> Result<Self> {
        if !PRESET_DIMS.contains(&d) {
            return Err(RlgpError::Config(format!("no preset for d = {d}; choose one of {PRESET_DIMS:?}")));
        }
        Ok(Self {
            scenarios: vec![ScenarioKind::Partition],
            d,
            n_train: 10 * d,
            n_test: 200,
            seed: 0,
            methods: vec![Method::Rlgp(None), Method::LocalGp, Method::Median],
            q_mode: QMode::Adaptive,
            tau: 3.0,
            neighbors: DEFAULT_NEIGHBORS,
            timing: false,
        })
    }

    /// Parses `key = value` lines. `#` starts a comment. `preset` is applied
    /// first; other keys override it, and `n_train` defaults to `10d`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                RlgpError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(RlgpError::Config(format!("duplicate key {key:?}")));
            }
        }

        let num = |key: &str, v: &str| -> Result<usize> {
            v.parse().map_err(|_| RlgpError::Config(format!("{key}: expected a non-negative integer, got {v:?}")))
        };
        let mut cfg = match pairs.remove("preset") {
            Some(v) => Self::preset(num("preset", &v)?)?,
            None => Self::default(),
        };
        let mut n_train = None;
        for (key, v) in &pairs {
            match key.as_str() {
                "scenario" => cfg.scenarios = ScenarioKind::parse_list(v)?,
                "d" => cfg.d = num(key, v)?,
                "n_train" => n_train = Some(num(key, v)?),
                "n_test" => cfg.n_test = num(key, v)?,
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .map_err(|_| RlgpError::Config(format!("seed: expected an integer, got {v:?}")))?
                }
                "methods" => {
                    cfg.methods = v
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                "q_mode" => cfg.q_mode = v.parse()?,
                "tau" => {
                    cfg.tau = v
                        .parse()
                        .map_err(|_| RlgpError::Config(format!("tau: expected a number, got {v:?}")))?
                }
                "neighbors" => cfg.neighbors = num(key, v)?,
                "timing" => {
                    cfg.timing = v
                        .parse()
                        .map_err(|_| RlgpError::Config(format!("timing: expected true or false, got {v:?}")))?
                }
                other => return Err(RlgpError::Config(format!("unknown key {other:?}"))),
            }
        }
        cfg.n_train = n_train.unwrap_or(10 * cfg.d);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RlgpError::Config(m));
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if self.scenarios.is_empty() {
            return bad("no scenario given".into());
        }
        if self.n_test == 0 || self.n_test > MAX_TEST_POINTS {
            return bad(format!("n_test must be in 1..={MAX_TEST_POINTS}"));
        }
        if self.neighbors == 0 {
            return bad("neighbors must be at least 1".into());
        }
        if self.scenarios.contains(&ScenarioKind::Partition) {
            if self.d == 0 {
                return bad("d must be at least 1".into());
            }
            if self.n_train == 0 {
                return bad("n_train must be at least 1".into());
            }
        }
        self.estimator(None).validate()
    }

    fn estimator(&self, q: Option<QMode>) -> EstimatorConfig {
        EstimatorConfig {
            tau: self.tau,
            ..EstimatorConfig::default()
        }
        .with_q(q.unwrap_or(self.q_mode))
    }
}

/// Metrics for one (scenario, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scenario: String,
    pub method: String,
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mse: f64,
    pub mae: f64,
    pub crps: f64,
    /// Mean fit + predict wall-clock per test point (0 unless timing is on).
    pub mean_seconds: f64,
    pub n_points: usize,
    pub n_failed: usize,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, scenario: &str, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
                r.scenario, r.method, r.d, r.n_train, r.n_test, self.seed, r.mse, r.mae, r.crps,
                r.mean_seconds, r.n_points, r.n_failed
            ));
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<18} {:<16} {:>12} {:>12} {:>12} {:>12} {:>8} {:>8}\n",
            "scenario", "method", "mse", "mae", "crps", "sec/point", "points", "failed"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<18} {:<16} {:>12.5} {:>12.5} {:>12.5} {:>12.6} {:>8} {:>8}\n",
                r.scenario, r.method, r.mse, r.mae, r.crps, r.mean_seconds, r.n_points, r.n_failed
            ));
        }
        out
    }
}

/// One prediction task: training set, query, noiseless truth.
struct Task<'a> {
    train: &'a Dataset,
    query: Vec<f64>,
    truth: f64,
    neighbors: usize,
}

struct Outcome {
    mean: f64,
    variance: f64,
    seconds: f64,
}

fn run_one(task: &Task<'_>, method: Method, cfg: &BenchConfig, baseline: (f64, f64)) -> Result<Outcome> {
    let estimator = match method {
        Method::Median => {
            return Ok(Outcome {
                mean: baseline.0,
                variance: baseline.1,
                seconds: 0.0,
            })
        }
        Method::LocalGp => cfg.estimator(Some(QMode::Count(0))),
        Method::Rlgp(q) => cfg.estimator(q),
    };
    let n = task.neighbors.min(task.train.len());
    let nb = select_neighbors(task.train, &task.query, n)?;
    let start = Instant::now();
    let model = fit(&nb, &estimator)?;
    let pred = predict(&model)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(Outcome {
        mean: pred.mean,
        variance: pred.variance,
        seconds,
    })
}

fn score(
    scenario: &str,
    method: Method,
    tasks: &[Task<'_>],
    baselines: &[(f64, f64)],
    cfg: &BenchConfig,
    shape: (usize, usize, usize),
) -> BenchRow {
    let outcomes: Vec<Result<Outcome>> = tasks
        .par_iter()
        .zip(baselines.par_iter())
        .map(|(task, base)| run_one(task, method, cfg, *base))
        .collect();

    let (mut sq, mut abs, mut crps, mut secs, mut ok) = (0.0, 0.0, 0.0, 0.0, 0usize);
    let mut first_error = None;
    for (task, outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                let err = o.mean - task.truth;
                sq += err * err;
                abs += err.abs();
                crps += crps_gaussian(o.mean, o.variance, task.truth);
                secs += o.seconds;
                ok += 1;
            }
            Err(e) => {
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let avg = |total: f64| if ok == 0 { f64::NAN } else { total / ok as f64 };
    BenchRow {
        scenario: scenario.to_string(),
        method: method.to_string(),
        d: shape.0,
        n_train: shape.1,
        n_test: shape.2,
        mse: avg(sq),
        mae: avg(abs),
        crps: avg(crps),
        mean_seconds: if cfg.timing { avg(secs) } else { 0.0 },
        n_points: tasks.len(),
        n_failed: tasks.len() - ok,
        first_error,
    }
}

fn median_baseline(train: &Dataset) -> (f64, f64) {
    let y = train.y().as_slice();
    (median(y), variance(y))
}

/// Runs every method on a caller-supplied training set and query list,
/// labelling the rows with `label`.
pub fn bench_dataset(
    cfg: &BenchConfig,
    label: &str,
    train: &Dataset,
    queries: &[Vec<f64>],
    truths: &[f64],
) -> Result<Vec<BenchRow>> {
    if queries.len() != truths.len() || queries.is_empty() {
        return Err(RlgpError::InvalidInput(format!(
            "{} queries but {} truths",
            queries.len(),
            truths.len()
        )));
    }
    let tasks: Vec<Task<'_>> = queries
        .iter()
        .zip(truths)
        .map(|(q, t)| Task {
            train,
            query: q.clone(),
            truth: *t,
            neighbors: cfg.neighbors,
        })
        .collect();
    let baselines = vec![median_baseline(train); tasks.len()];
    Ok(cfg
        .methods
        .iter()
        .map(|&m| score(label, m, &tasks, &baselines, cfg, (train.dim(), train.len(), tasks.len())))
        .collect())
}

/// Runs every method on every scenario. Rows are ordered scenario-major in
/// config order. Per-point failures are counted, not fatal.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.scenarios.len() * cfg.methods.len());
    for &scenario in &cfg.scenarios {
        match scenario {
            ScenarioKind::Partition => {
                let spec = PartitionSpec::random(cfg.d, cfg.seed);
                let sample = sample_partitioned_gp(&spec, cfg.n_train, cfg.n_test, cfg.seed)?;
                let base = median_baseline(&sample.train);
                let tasks: Vec<Task<'_>> = (0..cfg.n_test)
                    .map(|i| Task {
                        train: &sample.train,
                        query: sample.test.row(i),
                        truth: sample.truth[i],
                        neighbors: cfg.neighbors,
                    })
                    .collect();
                let baselines = vec![base; tasks.len()];
                for &method in &cfg.methods {
                    rows.push(score(scenario.name(), method, &tasks, &baselines, cfg, (cfg.d, cfg.n_train, cfg.n_test)));
                }
            }
            ScenarioKind::Boundary(kind) => {
                let idx = BoundaryKind::ALL.iter().position(|k| *k == kind).expect("known kind");
                let instances: Vec<_> = (0..cfg.n_test as u64)
                    .map(|k| boundary_scenarios(cfg.seed.wrapping_add(k)).swap_remove(idx))
                    .collect();
                let tasks: Vec<Task<'_>> = instances
                    .iter()
                    .map(|s| Task {
                        train: &s.train,
                        query: s.query.clone(),
                        truth: s.truth,
                        neighbors: cfg.neighbors.min(s.neighbors),
                    })
                    .collect();
                let baselines: Vec<_> = instances.iter().map(|s| median_baseline(&s.train)).collect();
                let n_train = instances[0].train.len();
                for &method in &cfg.methods {
                    rows.push(score(scenario.name(), method, &tasks, &baselines, cfg, (2, n_train, cfg.n_test)));
                }
            }
        }
    }
    Ok(BenchReport { seed: cfg.seed, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = BenchConfig::parse(
            "# comment\nscenario = partition\nd = 10\nn_test = 20\nseed = 5\nmethods = rlgp, rlgp:0.1n, localgp, median\nq_mode = 4\ntau = 2.5\nneighbors = 30\n",
        )
        .unwrap();
        assert_eq!(cfg.d, 10);
        assert_eq!(cfg.n_train, 100);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.q_mode, QMode::Count(4));
        assert_eq!(cfg.methods.len(), 4);
        assert_eq!(cfg.methods[1].to_string(), "rlgp:0.1n");
        assert_eq!(cfg.neighbors, 30);
    }

    #[test]
    fn preset_then_override() {
        let cfg = BenchConfig::parse("n_test = 10\npreset = 25\n").unwrap();
        assert_eq!((cfg.d, cfg.n_train, cfg.n_test), (25, 250, 10));
        assert!(BenchConfig::parse("preset = 3").is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_methods() {
        assert!(matches!(BenchConfig::parse("colour = red"), Err(RlgpError::Config(_))));
        assert!(matches!(BenchConfig::parse("methods = rlgp, tgp"), Err(RlgpError::Config(_))));
        assert!(matches!(BenchConfig::parse("methods = rlgp:0.1"), Err(RlgpError::Config(_))));
        assert!(matches!(BenchConfig::parse("d = 2\nd = 3"), Err(RlgpError::Config(_))));
        assert!(matches!(BenchConfig::parse("scenario = moon"), Err(RlgpError::Config(_))));
    }

    #[test]
    fn row_count_is_methods_times_scenarios() {
        let mut cfg = BenchConfig::parse("scenario = partition, boundary\nn_test = 3\nmethods = median, localgp").unwrap();
        cfg.d = 2;
        let report = run_benchmark(&cfg).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert!(report.rows.iter().all(|r| r.mse.is_finite() && r.mse >= 0.0 && r.crps >= 0.0));
        assert_eq!(report.to_csv().lines().count(), 9);
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = BenchConfig::parse("n_test = 8\nseed = 3").unwrap();
        assert_eq!(run_benchmark(&cfg).unwrap().to_csv(), run_benchmark(&cfg).unwrap().to_csv());
    }
}
