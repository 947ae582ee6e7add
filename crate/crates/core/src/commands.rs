//! Batch subcommands behind the `cggm` binary.
//!
//! Every command reads a [`RunConfig`], writes its outputs into
//! `config.out` (default: the working directory) and reports the files it
//! wrote together with a process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    read_csv, read_estimate, read_graph, read_truth, replicates_csv, to_dot, trace_csv, write_csv_to,
    EstimateFile, ReplicateRow, Summary, TruthFile,
};
use crate::metrics::{evaluate, MetricsReport};
use crate::model::{gram, Hyperparams};
use crate::optimizer::{fit_gram, penalty_free_fit};
use crate::selection::{colored_estimate, tune_gram, StartPoint, TuneGrid};
use crate::simulate::{simulate, Family, SimSpec};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_TUNING: i32 = 4;

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AllFitsFailed => EXIT_TUNING,
        _ => EXIT_INPUT,
    }
}

/// Parameters for every subcommand. Loaded from TOML or JSON; command-line
/// flags override individual fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<Family>,
    /// `p` for star and cycle graphs, the lattice side for grids.
    pub p: Option<usize>,
    pub n: Option<usize>,
    /// Simulation seed; for `replicate`, replicate `r` uses `seed + r`.
    pub seed: Option<u64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub tau: Option<f64>,
    /// Solver controls; its penalty weights are ignored.
    pub solver: Option<Hyperparams>,
    pub grid: Option<TuneGrid>,
    /// DC starting point for `fit`.
    pub start: Option<StartPoint>,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub estimate: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a config file; `.json` files are JSON, anything else TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let malformed = |message: String| Error::MalformedFile {
            path: path.to_path_buf(),
            message,
        };
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| malformed(e.to_string()))
        }
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: RunConfig) -> Self {
        Self {
            family: other.family.or(self.family),
            p: other.p.or(self.p),
            n: other.n.or(self.n),
            seed: other.seed.or(self.seed),
            lambda1: other.lambda1.or(self.lambda1),
            lambda2: other.lambda2.or(self.lambda2),
            lambda3: other.lambda3.or(self.lambda3),
            tau: other.tau.or(self.tau),
            solver: other.solver.or(self.solver),
            grid: other.grid.or(self.grid),
            start: other.start.or(self.start),
            reps: other.reps.or(self.reps),
            threads: other.threads.or(self.threads),
            out: other.out.or(self.out),
            data: other.data.or(self.data),
            truth: other.truth.or(self.truth),
            estimate: other.estimate.or(self.estimate),
        }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn sim_spec(&self, seed: u64) -> Result<SimSpec> {
        let missing = |what: &str| Error::InvalidInput(format!("{what} is required"));
        let spec = SimSpec {
            family: self.family.ok_or_else(|| missing("family"))?,
            size: self.p.ok_or_else(|| missing("p"))?,
            n: self.n.ok_or_else(|| missing("n"))?,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn solver(&self) -> Hyperparams {
        self.solver.unwrap_or_default()
    }

    fn explicit_hyper(&self) -> Result<Hyperparams> {
        let [Some(lambda1), Some(lambda2), Some(lambda3), Some(tau)] =
            [self.lambda1, self.lambda2, self.lambda3, self.tau]
        else {
            return Err(Error::InvalidInput("lambda1, lambda2, lambda3 and tau must all be given".into()));
        };
        let hyper = Hyperparams {
            lambda1,
            lambda2,
            lambda3,
            tau,
            ..self.solver()
        };
        hyper.validate()?;
        Ok(hyper)
    }

    /// The configured grid; single penalty values given directly replace the
    /// corresponding candidate lists. Without either, [`TuneGrid::coarse`].
    pub fn tune_grid(&self) -> TuneGrid {
        let mut grid = self.grid.clone().unwrap_or_else(TuneGrid::coarse);
        let lists = [
            (self.lambda1, &mut grid.lambda1),
            (self.lambda2, &mut grid.lambda2),
            (self.lambda3, &mut grid.lambda3),
            (self.tau, &mut grid.tau),
        ];
        for (value, list) in lists {
            if let Some(v) = value {
                *list = vec![v];
            }
        }
        grid
    }

    fn path(&self, field: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
        let path = field.ok_or_else(|| Error::InvalidInput(format!("--{what} is required")))?;
        if !path.exists() {
            return Err(Error::InvalidInput(format!("{what} file {} does not exist", path.display())));
        }
        Ok(path.clone())
    }
}

/// Files written by a command and the exit code to report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub written: Vec<PathBuf>,
    pub code: i32,
}

/// Writes through a temporary file so a failed run never leaves a partial
/// output behind.
fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `data.csv` and `truth.json`.
pub fn cmd_simulate(config: &RunConfig) -> Result<CommandOutput> {
    let spec = config.sim_spec(config.seed.unwrap_or(0))?;
    let (truth, data) = simulate(&spec)?;
    let dir = config.out_dir()?;
    let mut csv = Vec::new();
    write_csv_to(&mut csv, &data)?;
    let data_path = dir.join("data.csv");
    let truth_path = dir.join("truth.json");
    write_file(&data_path, &csv)?;
    write_file(&truth_path, &json_bytes(&TruthFile::new(&truth, spec.n, spec.seed))?)?;
    Ok(CommandOutput {
        written: vec![data_path, truth_path],
        code: EXIT_SUCCESS,
    })
}

/// Fits with explicit hyperparameters and writes `estimate.json`.
/// Nonconvergence still writes the estimate but exits with code 3.
pub fn cmd_fit(config: &RunConfig) -> Result<CommandOutput> {
    let hyper = config.explicit_hyper()?;
    let data = read_csv(&config.path(config.data.as_ref(), "data")?)?.center_columns()?;
    let g = gram(&data);
    let init = match config.start.unwrap_or(StartPoint::Default) {
        StartPoint::Default => None,
        StartPoint::PenaltyFree => Some(penalty_free_fit(&g, &hyper)?),
    };
    let report = fit_gram(&g, &hyper, init.as_ref())?;
    let estimate = colored_estimate(&report.params, &g, &hyper)?;
    let path = config.out_dir()?.join("estimate.json");
    write_file(&path, &json_bytes(&EstimateFile::new(&estimate, &report, &hyper, data.n()))?)?;
    let code = if report.converged() {
        EXIT_SUCCESS
    } else {
        warn!("solver did not converge; estimate written anyway");
        EXIT_NONCONVERGENCE
    };
    Ok(CommandOutput {
        written: vec![path],
        code,
    })
}

/// Tunes by BIC and writes `estimate.json` and `trace.csv`.
pub fn cmd_tune(config: &RunConfig) -> Result<CommandOutput> {
    let grid = config.tune_grid();
    let base = config.solver();
    let data = read_csv(&config.path(config.data.as_ref(), "data")?)?.center_columns()?;
    let g = gram(&data);
    let outcome = tune_gram(&g, &grid, &base)?;
    let best = outcome.best_record();
    info!(
        "selected lambda1={} lambda2={} lambda3={} tau={} (bic {})",
        best.hyper.lambda1, best.hyper.lambda2, best.hyper.lambda3, best.hyper.tau, best.bic
    );
    let dir = config.out_dir()?;
    let est_path = dir.join("estimate.json");
    let trace_path = dir.join("trace.csv");
    let file = EstimateFile::new(&outcome.estimate, &outcome.fit, &best.hyper, data.n());
    write_file(&est_path, &json_bytes(&file)?)?;
    write_file(&trace_path, &trace_csv(&outcome.records, outcome.best)?)?;
    Ok(CommandOutput {
        written: vec![est_path, trace_path],
        code: EXIT_SUCCESS,
    })
}

/// Simulates, tunes and evaluates one replicate.
pub fn run_replicate(spec: &SimSpec, grid: &TuneGrid, base: &Hyperparams, replicate: usize) -> ReplicateRow {
    let result = (|| -> Result<ReplicateRow> {
        let (truth, data) = simulate(spec)?;
        let g = gram(&data.center_columns()?);
        let outcome = tune_gram(&g, grid, base)?;
        let hyper = outcome.best_record().hyper;
        let m = evaluate(&outcome.estimate.params, &truth.theta, &truth.graph, hyper.eps_zero, hyper.eps_merge)?;
        Ok(ReplicateRow {
            replicate,
            seed: spec.seed,
            lambda1: hyper.lambda1,
            lambda2: hyper.lambda2,
            lambda3: hyper.lambda3,
            tau: hyper.tau,
            df: outcome.estimate.df,
            converged: outcome.fit.converged(),
            mse: m.mse,
            f1: m.f1,
            d0: m.d0,
            acc_all: m.acc_all,
            error: None,
        })
    })();
    result.unwrap_or_else(|err| {
        warn!("replicate {replicate} (seed {}) failed: {err}", spec.seed);
        ReplicateRow {
            replicate,
            seed: spec.seed,
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            lambda3: f64::NAN,
            tau: f64::NAN,
            df: 0,
            converged: false,
            mse: f64::NAN,
            f1: f64::NAN,
            d0: f64::NAN,
            acc_all: f64::NAN,
            error: Some(err.to_string()),
        }
    })
}

/// Runs replicates `1..=reps` with seeds `base_seed + r` on a pool of
/// `threads` workers. Rows come back in replicate order.
pub fn replicate_rows(
    spec: &SimSpec,
    grid: &TuneGrid,
    base: &Hyperparams,
    reps: usize,
    threads: usize,
) -> Result<Vec<ReplicateRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(|| {
        (1..=reps)
            .into_par_iter()
            .map(|r| {
                let spec = SimSpec {
                    seed: spec.seed.wrapping_add(r as u64),
                    ..*spec
                };
                run_replicate(&spec, grid, base, r)
            })
            .collect()
    }))
}

/// Monte Carlo study; writes `replicates.csv` and `summary.csv`.
pub fn cmd_replicate(config: &RunConfig) -> Result<CommandOutput> {
    let spec = config.sim_spec(config.seed.unwrap_or(0))?;
    let reps = config.reps.unwrap_or(1);
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    let grid = config.tune_grid();
    grid.validate()?;
    let threads = config
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows = replicate_rows(&spec, &grid, &config.solver(), reps, threads)?;
    let summary = Summary::from_rows(spec.family, spec.p(), spec.n, &rows);
    if summary.failed == reps {
        return Err(Error::AllFitsFailed);
    }
    let dir = config.out_dir()?;
    let rows_path = dir.join("replicates.csv");
    let summary_path = dir.join("summary.csv");
    write_file(&rows_path, &replicates_csv(&rows)?)?;
    write_file(&summary_path, &summary.to_csv()?)?;
    Ok(CommandOutput {
        written: vec![rows_path, summary_path],
        code: EXIT_SUCCESS,
    })
}

/// Scores an estimate file against a truth file; writes `metrics.json`.
pub fn cmd_eval(config: &RunConfig) -> Result<CommandOutput> {
    let est = read_estimate(&config.path(config.estimate.as_ref(), "estimate")?)?;
    let truth = read_truth(&config.path(config.truth.as_ref(), "truth")?)?.to_model()?;
    let hyper = est.hyperparams;
    let report: MetricsReport = evaluate(&est.params()?, &truth.theta, &truth.graph, hyper.eps_zero, hyper.eps_merge)?;
    let path = config.out_dir()?.join("metrics.json");
    write_file(&path, &json_bytes(&report)?)?;
    Ok(CommandOutput {
        written: vec![path],
        code: EXIT_SUCCESS,
    })
}

/// Renders the coloring of an estimate (or truth) file to `graph.dot`.
pub fn cmd_export_dot(config: &RunConfig) -> Result<CommandOutput> {
    let source = config
        .estimate
        .as_ref()
        .or(config.truth.as_ref())
        .ok_or_else(|| Error::InvalidInput("--estimate or --truth is required".into()))?;
    let graph = read_graph(&config.path(Some(source), "estimate")?)?;
    let path = config.out_dir()?.join("graph.dot");
    write_file(&path, to_dot(&graph).as_bytes())?;
    Ok(CommandOutput {
        written: vec![path],
        code: EXIT_SUCCESS,
    })
}
