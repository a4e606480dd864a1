//! Simulation grids: scenarios x methods x replications, run in parallel
//! and reduced to rejection rates.
//!
//! Every replication of a scenario draws its dataset from the stream
//! `"{scenario_id}/rep={rep}/data"`, so all methods see the same data. The
//! chain for an imputation posture uses `"{scenario_id}/rep={rep}/{posture}/chain"`;
//! methods that share a posture (for example `m2-stat`, `m2-disc` and
//! `model`) are evaluated on one chain, which gives the same numbers as
//! running them one at a time. Results are keyed by cell and merged in a
//! fixed order, so the output does not depend on the worker count.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::dgp::generate;
use crate::frt::{run_tests, FrtError, TestOptions};
use crate::model::{
    ChainConfig, ComplianceLevels, ConfigError, ImputationPosture, Method, Predictiveness, ScenarioConfig, TestKind,
    ETA_C0_GRID, TAU_ALTERNATIVE,
};
use crate::rng::{derive_stream, fnv1a64};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("checkpoint was written for a different grid (expected {expected}, found {found})")]
    ChecksumMismatch { expected: String, found: String },
    #[error("malformed checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
    #[error("results csv line {line}: {reason}")]
    Results { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn tau(&self) -> f64 {
        match self {
            Hypothesis::H0 => 0.0,
            Hypothesis::H1 => TAU_ALTERNATIVE,
        }
    }
}

impl FromStr for Hypothesis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "H0" | "h0" => Ok(Hypothesis::H0),
            "H1" | "h1" => Ok(Hypothesis::H1),
            other => Err(ConfigError::Invalid(format!("unknown hypothesis {other:?} (H0|H1)"))),
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub predictiveness: Predictiveness,
    pub eta_c0: f64,
    pub hypothesis: Hypothesis,
    pub misspecified: bool,
    pub config: ScenarioConfig,
}

impl Scenario {
    pub fn id(&self) -> String {
        format!(
            "{}/eta_c0={}/tau={}/{}",
            self.predictiveness,
            self.eta_c0,
            self.hypothesis.tau(),
            if self.misspecified { "misspecified" } else { "correct" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub predictiveness: Vec<Predictiveness>,
    pub levels: ComplianceLevels,
    pub eta_c0: Vec<f64>,
    pub hypotheses: Vec<Hypothesis>,
    pub methods: Vec<Method>,
    pub misspecified: bool,
    pub replications: usize,
    pub chain: ChainConfig,
    pub base_seed: u64,
    pub alpha_level: f64,
    pub worker_count: usize,
    pub n: usize,
    pub n_t: usize,
}

impl Default for GridSpec {
    /// Desk scale over the full grid.
    fn default() -> Self {
        let mut methods = Method::FRT_ALL.to_vec();
        methods.extend([Method::Model { covariates: false }, Method::Model { covariates: true }]);
        Self {
            predictiveness: Predictiveness::ALL.to_vec(),
            levels: ComplianceLevels::ShareMatched,
            eta_c0: ETA_C0_GRID.to_vec(),
            hypotheses: vec![Hypothesis::H0, Hypothesis::H1],
            methods,
            misspecified: false,
            replications: 200,
            chain: ChainConfig { total_iterations: 1000, burn_in: 500, seed: 0 },
            base_seed: 0,
            alpha_level: 0.05,
            worker_count: 1,
            n: 500,
            n_t: 250,
        }
    }
}

impl GridSpec {
    /// Sorts and de-duplicates every dimension and checks invariants.
    pub fn normalized(mut self) -> Result<Self, ConfigError> {
        self.predictiveness.sort();
        self.predictiveness.dedup();
        self.eta_c0.sort_by(f64::total_cmp);
        self.eta_c0.dedup();
        self.hypotheses.sort();
        self.hypotheses.dedup();
        self.methods.sort();
        self.methods.dedup();
        let empty = [
            ("predictiveness", self.predictiveness.is_empty()),
            ("eta_c0", self.eta_c0.is_empty()),
            ("hypotheses", self.hypotheses.is_empty()),
            ("methods", self.methods.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(ConfigError::Invalid(format!("grid dimension {name} is empty")));
        }
        if self.worker_count == 0 {
            return Err(ConfigError::Invalid("worker count must be at least 1".into()));
        }
        for s in self.scenarios() {
            s.config.validate()?;
        }
        Ok(self)
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &predictiveness in &self.predictiveness {
            for &eta_c0 in &self.eta_c0 {
                for &hypothesis in &self.hypotheses {
                    let config = ScenarioConfig {
                        n: self.n,
                        n_t: self.n_t,
                        predictiveness,
                        levels: self.levels,
                        eta_n: 0.0,
                        eta_c0,
                        tau: hypothesis.tau(),
                        outcome_variance: 1.0,
                        replications: self.replications,
                        chain: self.chain,
                        alpha_level: self.alpha_level,
                    };
                    out.push(Scenario { predictiveness, eta_c0, hypothesis, misspecified: self.misspecified, config });
                }
            }
        }
        out
    }

    /// Identity of everything that influences results (worker count excluded).
    pub fn checksum(&self) -> String {
        let canonical = format!(
            "pred={:?};levels={};eta={:?};hyp={:?};methods={:?};mis={};reps={};iter={};burn={};seed={};alpha={:?};n={};nt={}",
            self.predictiveness,
            self.levels.as_str(),
            self.eta_c0,
            self.hypotheses,
            self.methods.iter().map(Method::series_id).collect::<Vec<_>>(),
            self.misspecified,
            self.replications,
            self.chain.total_iterations,
            self.chain.burn_in,
            self.base_seed,
            self.alpha_level,
            self.n,
            self.n_t
        );
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    /// Parses the flat `key = value` grid format. `#` starts a comment; list
    /// values are comma separated. Unlisted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut g = GridSpec::default();
        let (mut iterations, mut burn_in) = (g.chain.total_iterations, g.chain.burn_in);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| ConfigError::Invalid(format!("grid line {}: {msg}", lineno + 1));
            let (key, value) =
                line.split_once('=').ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let list = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("{key}: not a number: {v:?}")));
            let count = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("{key}: not a count: {v:?}")));
            match key {
                "predictiveness" => g.predictiveness = list().map(str::parse).collect::<Result<_, _>>()?,
                "compliance_levels" => g.levels = value.parse()?,
                "eta_c0" => g.eta_c0 = list().map(num).collect::<Result<_, _>>()?,
                "hypotheses" => g.hypotheses = list().map(str::parse).collect::<Result<_, _>>()?,
                "methods" => g.methods = list().map(str::parse).collect::<Result<_, _>>()?,
                "misspecified" => {
                    g.misspecified =
                        value.parse().map_err(|_| bad(format!("misspecified: expected true|false, got {value:?}")))?
                }
                "replications" => g.replications = count(value)?,
                "iterations" => iterations = count(value)?,
                "burn_in" => burn_in = count(value)?,
                "alpha_level" => g.alpha_level = num(value)?,
                "workers" => g.worker_count = count(value)?,
                "n" => g.n = count(value)?,
                "n_t" => g.n_t = count(value)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        g.chain = ChainConfig::new(iterations, burn_in, 0)?;
        g.normalized()
    }
}

/// Outcome of one (scenario, method, replication) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellOutcome {
    Done { p_value: f64, degenerate_draws: usize },
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CellKey {
    scenario: usize,
    method: Method,
    rep: usize,
}

/// Group of cells evaluated on one chain.
#[derive(Debug, Clone)]
struct Task {
    scenario: usize,
    rep: usize,
    posture: ImputationPosture,
    methods: Vec<Method>,
}

fn data_stream_label(scenario: &Scenario, rep: usize) -> String {
    format!("{}/rep={}/data", scenario.id(), rep)
}

fn chain_stream_label(scenario: &Scenario, rep: usize, posture: &ImputationPosture) -> String {
    format!("{}/rep={}/{}/chain", scenario.id(), rep, posture.label())
}

fn evaluate(
    scenario: &Scenario,
    rep: usize,
    posture: &ImputationPosture,
    methods: &[Method],
    base_seed: u64,
) -> Vec<CellOutcome> {
    let (data, _) = generate(&scenario.config, &mut derive_stream(base_seed, &data_stream_label(scenario, rep)))
        .expect("scenario validated");
    let kinds: Vec<TestKind> = methods.iter().map(Method::kind).collect();
    let stream = derive_stream(base_seed, &chain_stream_label(scenario, rep, posture));
    match run_tests(&data, posture, &kinds, &scenario.config.chain, &TestOptions::default(), &stream) {
        Ok(results) => results
            .into_iter()
            .map(|r| match r {
                Ok(t) => CellOutcome::Done { p_value: t.p_value, degenerate_draws: t.degenerate_draws },
                Err(_) => CellOutcome::Failed,
            })
            .collect(),
        Err(_) => vec![CellOutcome::Failed; methods.len()],
    }
}

/// Computes one cell on its own. Agrees exactly with the grid runner.
pub fn run_replication(
    scenario: &Scenario,
    method: Method,
    rep_index: usize,
    base_seed: u64,
) -> Result<(f64, bool), FrtError> {
    let posture = method.posture(scenario.misspecified);
    let (data, _) = generate(&scenario.config, &mut derive_stream(base_seed, &data_stream_label(scenario, rep_index)))
        .map_err(crate::gibbs::GibbsError::from)?;
    let stream = derive_stream(base_seed, &chain_stream_label(scenario, rep_index, &posture));
    let mut out =
        run_tests(&data, &posture, &[method.kind()], &scenario.config.chain, &TestOptions::default(), &stream)?;
    let result = out.pop().expect("one kind")?;
    Ok((result.p_value, result.rejects(scenario.config.alpha_level)))
}

/// Dataset fed to every method for `(scenario, rep)`.
pub fn replication_dataset(scenario: &Scenario, rep_index: usize, base_seed: u64) -> crate::model::ObservedDataset {
    generate(&scenario.config, &mut derive_stream(base_seed, &data_stream_label(scenario, rep_index)))
        .expect("scenario validated")
        .0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionSummary {
    pub scenario_id: String,
    pub predictiveness: Predictiveness,
    pub eta_c0: f64,
    pub tau: f64,
    pub misspecified: bool,
    pub method: Method,
    /// Replications that produced a p-value.
    pub replications: usize,
    pub rejection_rate: f64,
    pub mc_standard_error: f64,
    pub mean_degenerate_draws: f64,
}

impl RejectionSummary {
    pub fn eta_difference(&self) -> f64 {
        // eta_n is fixed at zero across the grid.
        self.eta_c0
    }
}

pub fn mc_standard_error(rate: f64, replications: usize) -> f64 {
    (rate * (1.0 - rate) / replications as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub summaries: Vec<RejectionSummary>,
    /// False when the run stopped early because of a task limit.
    pub complete: bool,
    pub failed_cells: usize,
}

pub fn run_grid(grid: &GridSpec) -> Result<Vec<RejectionSummary>, SimError> {
    Ok(run_grid_with(grid, None, None)?.summaries)
}

/// Runs the grid, optionally persisting each finished cell to `checkpoint`
/// and skipping cells already recorded there. `max_tasks` stops after that
/// many new chains, which leaves a resumable partial checkpoint.
pub fn run_grid_with(
    grid: &GridSpec,
    checkpoint: Option<&Path>,
    max_tasks: Option<usize>,
) -> Result<GridOutcome, SimError> {
    let grid = grid.clone().normalized()?;
    let scenarios = grid.scenarios();
    let checksum = grid.checksum();

    let mut done: HashMap<CellKey, CellOutcome> = HashMap::new();
    if let Some(path) = checkpoint {
        done = load_checkpoint(path, &checksum, &scenarios, &grid.methods)?;
    }

    let mut pending = Vec::new();
    for (si, scenario) in scenarios.iter().enumerate() {
        for rep in 0..grid.replications {
            let mut by_posture: BTreeMap<ImputationPosture, Vec<Method>> = BTreeMap::new();
            for &m in &grid.methods {
                if !done.contains_key(&CellKey { scenario: si, method: m, rep }) {
                    by_posture.entry(m.posture(scenario.misspecified)).or_default().push(m);
                }
            }
            pending.extend(by_posture.into_iter().map(|(posture, methods)| Task {
                scenario: si,
                rep,
                posture,
                methods,
            }));
        }
    }
    let complete = max_tasks.is_none_or(|limit| limit >= pending.len());
    if let Some(limit) = max_tasks {
        pending.truncate(limit);
    }

    let writer = match checkpoint {
        Some(path) => Some(Mutex::new(open_checkpoint(path, &checksum)?)),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.worker_count)
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    let computed: Vec<Result<Vec<(CellKey, CellOutcome)>, std::io::Error>> = pool.install(|| {
        pending
            .par_iter()
            .map(|task| {
                let scenario = &scenarios[task.scenario];
                let outcomes = evaluate(scenario, task.rep, &task.posture, &task.methods, grid.base_seed);
                let cells: Vec<(CellKey, CellOutcome)> = task
                    .methods
                    .iter()
                    .zip(outcomes)
                    .map(|(&method, o)| (CellKey { scenario: task.scenario, method, rep: task.rep }, o))
                    .collect();
                if let Some(w) = &writer {
                    let mut lines = String::new();
                    for (key, outcome) in &cells {
                        checkpoint_line(&mut lines, &scenarios[key.scenario], key, outcome);
                    }
                    let mut w = w.lock().expect("checkpoint writer poisoned");
                    w.write_all(lines.as_bytes())?;
                    w.flush()?;
                }
                Ok(cells)
            })
            .collect()
    });
    for cells in computed {
        done.extend(cells?);
    }

    let failed_cells = done.values().filter(|o| matches!(o, CellOutcome::Failed)).count();
    Ok(GridOutcome { summaries: summarize(&grid, &scenarios, &done), complete, failed_cells })
}

fn summarize(grid: &GridSpec, scenarios: &[Scenario], done: &HashMap<CellKey, CellOutcome>) -> Vec<RejectionSummary> {
    let mut out = Vec::new();
    for (si, scenario) in scenarios.iter().enumerate() {
        for &method in &grid.methods {
            let (mut ok, mut rejects, mut degenerate) = (0usize, 0usize, 0usize);
            let mut seen = 0usize;
            for rep in 0..grid.replications {
                match done.get(&CellKey { scenario: si, method, rep }) {
                    Some(CellOutcome::Done { p_value, degenerate_draws }) => {
                        seen += 1;
                        ok += 1;
                        rejects += usize::from(*p_value <= grid.alpha_level);
                        degenerate += degenerate_draws;
                    }
                    Some(CellOutcome::Failed) => seen += 1,
                    None => {}
                }
            }
            if seen == 0 {
                continue;
            }
            let rate = if ok == 0 { 0.0 } else { rejects as f64 / ok as f64 };
            out.push(RejectionSummary {
                scenario_id: scenario.id(),
                predictiveness: scenario.predictiveness,
                eta_c0: scenario.eta_c0,
                tau: scenario.hypothesis.tau(),
                misspecified: scenario.misspecified,
                method,
                replications: ok,
                rejection_rate: rate,
                mc_standard_error: if ok == 0 { 0.0 } else { mc_standard_error(rate, ok) },
                mean_degenerate_draws: if ok == 0 { 0.0 } else { degenerate as f64 / ok as f64 },
            });
        }
    }
    out
}

const CHECKPOINT_HEADER: &str = "scenario_id,method,kind,rep,status,p_value,degenerate_draws";

fn checkpoint_line(out: &mut String, scenario: &Scenario, key: &CellKey, outcome: &CellOutcome) {
    let (m, k) = (key.method.method_id(), key.method.kind());
    match outcome {
        CellOutcome::Done { p_value, degenerate_draws } => {
            writeln!(out, "{},{m},{k},{},ok,{p_value:?},{degenerate_draws}", scenario.id(), key.rep).unwrap()
        }
        CellOutcome::Failed => writeln!(out, "{},{m},{k},{},failed,,", scenario.id(), key.rep).unwrap(),
    }
}

fn open_checkpoint(path: &Path, checksum: &str) -> Result<File, SimError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "# frtpp checkpoint v1")?;
        writeln!(file, "# grid={checksum}")?;
        writeln!(file, "{CHECKPOINT_HEADER}")?;
        file.flush()?;
    }
    Ok(file)
}

fn load_checkpoint(
    path: &Path,
    checksum: &str,
    scenarios: &[Scenario],
    methods: &[Method],
) -> Result<HashMap<CellKey, CellOutcome>, SimError> {
    let mut done = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    let text = {
        let mut buf = String::new();
        for line in BufReader::new(file).lines() {
            buf.push_str(&line?);
            buf.push('\n');
        }
        buf
    };
    if text.trim().is_empty() {
        return Ok(done);
    }
    let scenario_index: HashMap<String, usize> = scenarios.iter().enumerate().map(|(i, s)| (s.id(), i)).collect();
    let method_set: BTreeSet<Method> = methods.iter().copied().collect();
    let mut saw_checksum = false;
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let lineno = i + 1;
        let err = |reason: &str| SimError::Checkpoint { line: lineno, reason: reason.to_owned() };
        if let Some(found) = line.strip_prefix("# grid=") {
            if found != checksum {
                return Err(SimError::ChecksumMismatch { expected: checksum.to_owned(), found: found.to_owned() });
            }
            saw_checksum = true;
            continue;
        }
        if line.starts_with('#') || *line == CHECKPOINT_HEADER || line.is_empty() {
            continue;
        }
        if !saw_checksum {
            return Err(err("missing grid checksum header"));
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            // A torn final line from an interrupted write is dropped.
            if lineno == lines.len() {
                break;
            }
            return Err(err("expected 7 fields"));
        }
        let scenario = *scenario_index.get(f[0]).ok_or_else(|| err("unknown scenario"))?;
        let method = Method::from_ids(f[1], f[2]).map_err(|e| err(&e.to_string()))?;
        if !method_set.contains(&method) {
            return Err(err("method not in grid"));
        }
        let rep: usize = f[3].parse().map_err(|_| err("bad rep"))?;
        let outcome = match f[4] {
            "ok" => CellOutcome::Done {
                p_value: f[5].parse().map_err(|_| err("bad p-value"))?,
                degenerate_draws: f[6].parse().map_err(|_| err("bad degenerate count"))?,
            },
            "failed" => CellOutcome::Failed,
            _ => return Err(err("bad status")),
        };
        done.insert(CellKey { scenario, method, rep }, outcome);
    }
    if !saw_checksum {
        return Err(SimError::Checkpoint { line: 1, reason: "missing grid checksum header".into() });
    }
    Ok(done)
}

pub const RESULTS_HEADER: &str =
    "scenario_id,predictiveness,eta_c0,tau,misspecified,method,kind,replications,rejection_rate,mc_se,mean_degenerate_draws";

pub fn results_to_csv(rows: &[RejectionSummary]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.3}",
            r.scenario_id,
            r.predictiveness,
            r.eta_c0,
            r.tau,
            r.misspecified,
            r.method.method_id(),
            r.method.kind(),
            r.replications,
            r.rejection_rate,
            r.mc_standard_error,
            r.mean_degenerate_draws
        )
        .unwrap();
    }
    out
}

pub fn results_from_csv(text: &str) -> Result<Vec<RejectionSummary>, SimError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(SimError::Results { line: 1, reason: format!("expected header {RESULTS_HEADER}") }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| SimError::Results { line: i + 1, reason };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 11 {
            return Err(err(format!("expected 11 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("not a number: {s:?}")));
        rows.push(RejectionSummary {
            scenario_id: f[0].to_owned(),
            predictiveness: f[1].parse().map_err(|e: ConfigError| err(e.to_string()))?,
            eta_c0: num(f[2])?,
            tau: num(f[3])?,
            misspecified: f[4].parse().map_err(|_| err(format!("bad misspecified flag {:?}", f[4])))?,
            method: Method::from_ids(f[5], f[6]).map_err(|e| err(e.to_string()))?,
            replications: f[7].parse().map_err(|_| err(format!("bad replications {:?}", f[7])))?,
            rejection_rate: num(f[8])?,
            mc_standard_error: num(f[9])?,
            mean_degenerate_draws: num(f[10])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid() -> GridSpec {
        GridSpec {
            predictiveness: vec![Predictiveness::None],
            eta_c0: vec![0.0, -1.0],
            hypotheses: vec![Hypothesis::H0],
            methods: vec!["m1-stat".parse().unwrap(), "m2-disc".parse().unwrap(), "model".parse().unwrap()],
            replications: 3,
            chain: ChainConfig::new(40, 20, 0).unwrap(),
            base_seed: 5,
            n: 60,
            n_t: 30,
            ..Default::default()
        }
    }

    #[test]
    fn grid_file_parses_and_normalizes() {
        let g = GridSpec::parse(
            "# comment\npredictiveness = high, none\neta_c0 = 3,-3,0\nhypotheses = H1,H0\nmethods = model,m1-stat\n\
             misspecified = true\nreplications = 7\niterations = 30\nburn_in = 10\nalpha_level = 0.1\nworkers = 2\n",
        )
        .unwrap();
        assert_eq!(g.predictiveness, vec![Predictiveness::None, Predictiveness::High]);
        assert_eq!(g.eta_c0, vec![-3.0, 0.0, 3.0]);
        assert_eq!(g.hypotheses, vec![Hypothesis::H0, Hypothesis::H1]);
        assert_eq!(g.methods[0].series_id(), "m1-stat");
        assert!(g.misspecified);
        assert_eq!((g.replications, g.chain.total_iterations, g.chain.burn_in), (7, 30, 10));
        assert_eq!(g.scenarios().len(), 12);
        assert_eq!(g.levels, ComplianceLevels::ShareMatched);

        let nominal = GridSpec::parse("compliance_levels = nominal").unwrap();
        assert_eq!(nominal.scenarios()[0].config.levels, ComplianceLevels::Nominal);
        assert_ne!(nominal.checksum(), GridSpec::default().checksum());
        assert!(GridSpec::parse("compliance_levels = printed").is_err());
    }

    #[test]
    fn grid_file_errors() {
        assert!(GridSpec::parse("bogus = 1").is_err());
        assert!(GridSpec::parse("methods =").is_err());
        assert!(GridSpec::parse("iterations = 10\nburn_in = 10").is_err());
        assert!(GridSpec::parse("replications = 0").is_err());
        assert!(GridSpec::parse("predictiveness = low").is_err());
        assert!(GridSpec::parse("no equals sign").is_err());
    }

    #[test]
    fn checksum_ignores_workers_only() {
        let a = tiny_grid();
        let b = GridSpec { worker_count: 8, ..tiny_grid() };
        let c = GridSpec { replications: 4, ..tiny_grid() };
        assert_eq!(a.checksum(), b.checksum());
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn single_replication_rate_is_zero_or_one() {
        let grid =
            GridSpec { eta_c0: vec![0.0], methods: vec!["m2-disc".parse().unwrap()], replications: 1, ..tiny_grid() };
        let rows = run_grid(&grid).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].rejection_rate == 0.0 || rows[0].rejection_rate == 1.0);
    }

    #[test]
    fn grid_matches_single_cell_runs() {
        let grid = tiny_grid();
        let rows = run_grid(&grid).unwrap();
        assert_eq!(rows.len(), 2 * 3);
        for row in &rows {
            let scenario = grid.scenarios().into_iter().find(|s| s.id() == row.scenario_id).unwrap();
            let rejects: usize = (0..grid.replications)
                .map(|rep| usize::from(run_replication(&scenario, row.method, rep, grid.base_seed).unwrap().1))
                .sum();
            assert_eq!(row.rejection_rate, rejects as f64 / grid.replications as f64);
            assert_eq!(row.mc_standard_error, mc_standard_error(row.rejection_rate, row.replications));
        }
    }

    #[test]
    fn replications_are_deterministic() {
        let grid = tiny_grid();
        let s = grid.scenarios()[0];
        let m: Method = "m1-stat".parse().unwrap();
        assert_eq!(run_replication(&s, m, 1, 9).unwrap(), run_replication(&s, m, 1, 9).unwrap());
        assert_eq!(replication_dataset(&s, 1, 9), replication_dataset(&s, 1, 9));
        assert_ne!(replication_dataset(&s, 1, 9), replication_dataset(&s, 2, 9));
    }

    #[test]
    fn results_csv_round_trip() {
        let rows = run_grid(&tiny_grid()).unwrap();
        let csv = results_to_csv(&rows);
        assert!(csv.starts_with(RESULTS_HEADER));
        let back = results_from_csv(&csv).unwrap();
        assert_eq!(back.len(), rows.len());
        assert_eq!(results_to_csv(&back), csv);
        assert!(results_from_csv("a,b\n").is_err());
    }

    #[test]
    fn checkpoint_resume_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let grid = tiny_grid();
        let full = results_to_csv(&run_grid(&grid).unwrap());

        let path = dir.path().join("ckpt.csv");
        let partial = run_grid_with(&grid, Some(&path), Some(7)).unwrap();
        assert!(!partial.complete);
        let resumed = run_grid_with(&grid, Some(&path), None).unwrap();
        assert!(resumed.complete);
        assert_eq!(results_to_csv(&resumed.summaries), full);

        let altered = GridSpec { replications: 4, ..tiny_grid() };
        assert!(matches!(run_grid_with(&altered, Some(&path), None), Err(SimError::ChecksumMismatch { .. })));

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert_eq!(results_to_csv(&run_grid_with(&grid, Some(&empty), None).unwrap().summaries), full);
    }
}
