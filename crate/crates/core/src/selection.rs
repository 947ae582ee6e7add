//! Composite-likelihood BIC tuning and extraction of the colored graph
//! from fitted parameters.

use std::cmp::Ordering;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::composite_loglik;
use crate::model::{
    all_pairs, gram, ColoredGraph, ColoredGraphEstimate, DataMatrix, GramCache, Hyperparams,
    PrecisionParams,
};
use crate::optimizer::{fit_gram, penalty_free_fit, FitReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    #[default]
    FullGrid,
    Sequential,
}

/// Where each DC run of a search starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPoint {
    /// `θ_jj = n/S_jj`, `β = 0`, as in a plain [`fit_gram`] call.
    Default,
    /// The unpenalized estimate, computed once per data set. Starting at
    /// `β = 0` makes every fusion pair active in the first surrogate, which
    /// can trap moderate edges in the zero class.
    #[default]
    PenaltyFree,
}

/// Values held fixed for not-yet-tuned parameters in sequential mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub lambda2: f64,
    pub lambda3: f64,
    pub tau: f64,
}

/// Candidate values for `(λ1, λ2, λ3, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda3: Vec<f64>,
    pub tau: Vec<f64>,
    #[serde(default)]
    pub mode: SearchMode,
    /// Defaults to the smallest candidate of each list.
    #[serde(default)]
    pub anchors: Option<Anchors>,
    #[serde(default)]
    pub start: StartPoint,
}

impl TuneGrid {
    pub fn full(lambda1: Vec<f64>, lambda2: Vec<f64>, lambda3: Vec<f64>, tau: Vec<f64>) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
            tau,
            mode: SearchMode::FullGrid,
            anchors: None,
            start: StartPoint::default(),
        }
    }

    pub fn sequential(lambda1: Vec<f64>, lambda2: Vec<f64>, lambda3: Vec<f64>, tau: Vec<f64>) -> Self {
        Self {
            mode: SearchMode::Sequential,
            ..Self::full(lambda1, lambda2, lambda3, tau)
        }
    }

    /// A small full grid (54 tuples) suited to the simulated families at
    /// `n` around 1000.
    pub fn coarse() -> Self {
        Self::full(
            vec![0.01, 0.05],
            vec![0.005, 0.01, 0.02],
            vec![0.001, 0.003, 0.01],
            vec![0.1, 0.15, 0.2],
        )
    }

    pub fn singleton(hyper: &Hyperparams) -> Self {
        Self::full(vec![hyper.lambda1], vec![hyper.lambda2], vec![hyper.lambda3], vec![hyper.tau])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("lambda1", &self.lambda1),
            ("lambda2", &self.lambda2),
            ("lambda3", &self.lambda3),
            ("tau", &self.tau),
        ] {
            if list.is_empty() {
                return Err(Error::InvalidInput(format!("candidate list {name} is empty")));
            }
        }
        for &t in &self.tau {
            Hyperparams::with_penalty(self.lambda1[0], self.lambda2[0], self.lambda3[0], t).validate()?;
        }
        for &l in self.lambda1.iter().chain(&self.lambda2).chain(&self.lambda3) {
            Hyperparams::with_penalty(l, 0.0, 0.0, self.tau[0]).validate()?;
        }
        Ok(())
    }

    pub fn anchors(&self) -> Anchors {
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        self.anchors.unwrap_or(Anchors {
            lambda2: min(&self.lambda2),
            lambda3: min(&self.lambda3),
            tau: min(&self.tau),
        })
    }

    /// Number of fits the configured search performs.
    pub fn cost(&self) -> usize {
        let lens = [self.lambda1.len(), self.lambda2.len(), self.lambda3.len(), self.tau.len()];
        match self.mode {
            SearchMode::FullGrid => lens.iter().product(),
            SearchMode::Sequential => lens.iter().sum(),
        }
    }
}

/// Composite-likelihood BIC `−2 l_c + df log n`.
pub fn bic_c(loglik: f64, df: usize, n: usize) -> f64 {
    -2.0 * loglik + df as f64 * (n as f64).ln()
}

/// Groups sorted `(value, id)` items into single-linkage classes with gap `eps`.
fn single_linkage(mut items: Vec<(f64, usize)>, eps: f64) -> Vec<Vec<(f64, usize)>> {
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut classes: Vec<Vec<(f64, usize)>> = Vec::new();
    for item in items {
        match classes.last_mut() {
            Some(class) if item.0 - class.last().expect("nonempty").0 <= eps => class.push(item),
            _ => classes.push(vec![item]),
        }
    }
    classes
}

// Offset from the first member so a constant class maps to itself exactly.
fn class_mean(class: &[(f64, usize)]) -> f64 {
    let first = class[0].0;
    first + class.iter().map(|c| c.0 - first).sum::<f64>() / class.len() as f64
}

/// Thresholds small off-diagonals to zero, merges near-equal values into
/// color classes (single linkage with gap `eps_merge`, separately for
/// diagonals and off-diagonals) and replaces each class by its mean.
pub fn extract_colored_estimate(
    params: &PrecisionParams,
    eps_zero: f64,
    eps_merge: f64,
) -> Result<(PrecisionParams, ColoredGraph)> {
    let p = params.p();
    let mut diag = params.diag().to_vec();
    let mut vertex_classes = Vec::new();
    let diag_items = diag.iter().copied().enumerate().map(|(i, v)| (v, i)).collect();
    for class in single_linkage(diag_items, eps_merge) {
        let mean = class_mean(&class);
        for &(_, v) in &class {
            diag[v] = mean;
        }
        vertex_classes.push(class.into_iter().map(|(_, v)| v).collect());
    }

    let pairs = all_pairs(p);
    let mut beta = vec![0.0; pairs.len()];
    let nonzero = params
        .beta()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, b)| b.abs() >= eps_zero)
        .map(|(i, b)| (b, i))
        .collect();
    let mut edge_classes = Vec::new();
    for class in single_linkage(nonzero, eps_merge) {
        let mean = class_mean(&class);
        if mean.abs() < eps_zero {
            continue;
        }
        for &(_, s) in &class {
            beta[s] = mean;
        }
        edge_classes.push(class.into_iter().map(|(_, s)| pairs[s]).collect());
    }
    Ok((PrecisionParams::new(diag, beta)?, ColoredGraph::new(p, vertex_classes, edge_classes)?))
}

/// Merged estimate with its composite likelihood, df and BIC.
pub fn colored_estimate(params: &PrecisionParams, gram: &GramCache, hyper: &Hyperparams) -> Result<ColoredGraphEstimate> {
    let (merged, graph) = extract_colored_estimate(params, hyper.eps_zero, hyper.eps_merge)?;
    let loglik = composite_loglik(&merged, gram)?;
    let df = graph.df();
    Ok(ColoredGraphEstimate {
        bic: bic_c(loglik, df, gram.n()),
        params: merged,
        graph,
        df,
        loglik,
    })
}

/// One evaluated hyperparameter tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneRecord {
    pub hyper: Hyperparams,
    pub loglik: f64,
    pub df: usize,
    pub bic: f64,
    pub converged: bool,
    /// Solver diagnostics: see [`FitReport::max_objective_increase`] and
    /// [`FitReport::final_residual`].
    pub objective_increase: f64,
    pub final_residual: f64,
    /// Set when the fit failed; the tuple is then excluded from selection.
    pub error: Option<String>,
}

impl TuneRecord {
    fn key(&self) -> [f64; 4] {
        [self.hyper.lambda1, self.hyper.lambda2, self.hyper.lambda3, self.hyper.tau]
    }

    /// Selection order: BIC, then df, then lexicographic `(λ1, λ2, λ3, τ)`.
    fn better_than(&self, other: &Self) -> bool {
        let by_key = self
            .key()
            .iter()
            .zip(other.key())
            .map(|(a, b)| a.total_cmp(&b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal);
        self.bic
            .total_cmp(&other.bic)
            .then(self.df.cmp(&other.df))
            .then(by_key)
            .is_lt()
    }
}

/// All evaluated tuples plus the winner.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub records: Vec<TuneRecord>,
    pub best: usize,
    pub fit: FitReport,
    pub estimate: ColoredGraphEstimate,
}

impl TuneOutcome {
    pub fn best_record(&self) -> &TuneRecord {
        &self.records[self.best]
    }
}

type Evaluated = (TuneRecord, Option<(FitReport, ColoredGraphEstimate)>);

fn evaluate_tuple(gram: &GramCache, hyper: Hyperparams, init: Option<&PrecisionParams>) -> Evaluated {
    let result = fit_gram(gram, &hyper, init).and_then(|report| {
        let estimate = colored_estimate(&report.params, gram, &hyper)?;
        Ok((report, estimate))
    });
    match result {
        Ok((report, estimate)) => (
            TuneRecord {
                hyper,
                loglik: estimate.loglik,
                df: estimate.df,
                bic: estimate.bic,
                converged: report.converged(),
                objective_increase: report.max_objective_increase(),
                final_residual: report.final_residual,
                error: None,
            },
            Some((report, estimate)),
        ),
        Err(err) => {
            warn!(
                "fit failed for (lambda1={}, lambda2={}, lambda3={}, tau={}): {err}",
                hyper.lambda1, hyper.lambda2, hyper.lambda3, hyper.tau
            );
            (
                TuneRecord {
                    hyper,
                    loglik: f64::NAN,
                    df: 0,
                    bic: f64::INFINITY,
                    converged: false,
                    objective_increase: f64::NAN,
                    final_residual: f64::NAN,
                    error: Some(err.to_string()),
                },
                None,
            )
        }
    }
}

/// Fits every tuple (in parallel on the current rayon pool) and returns
/// the results in input order.
fn evaluate_all(gram: &GramCache, tuples: Vec<Hyperparams>, init: Option<&PrecisionParams>) -> Vec<Evaluated> {
    tuples.into_par_iter().map(|h| evaluate_tuple(gram, h, init)).collect()
}

fn start_point(gram: &GramCache, grid: &TuneGrid, base: &Hyperparams) -> Option<PrecisionParams> {
    match grid.start {
        StartPoint::Default => None,
        StartPoint::PenaltyFree => match penalty_free_fit(gram, base) {
            Ok(params) => Some(params),
            Err(err) => {
                warn!("penalty-free start failed ({err}); using the default start");
                None
            }
        },
    }
}

fn pick_best(evaluated: &[Evaluated], offset: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (record, fit)) in evaluated.iter().enumerate() {
        if fit.is_none() {
            continue;
        }
        if best.is_none_or(|b| record.better_than(&evaluated[b].0)) {
            best = Some(i);
        }
    }
    best.map(|b| b + offset)
}

fn with_penalty(base: &Hyperparams, l1: f64, l2: f64, l3: f64, tau: f64) -> Hyperparams {
    Hyperparams {
        lambda1: l1,
        lambda2: l2,
        lambda3: l3,
        tau,
        ..*base
    }
}

/// Exhaustive search over the Cartesian product of the candidate lists.
/// `base` supplies the solver controls.
pub fn grid_search_gram(gram: &GramCache, grid: &TuneGrid, base: &Hyperparams) -> Result<TuneOutcome> {
    grid.validate()?;
    let mut tuples = Vec::with_capacity(grid.cost());
    for &l1 in &grid.lambda1 {
        for &l2 in &grid.lambda2 {
            for &l3 in &grid.lambda3 {
                for &tau in &grid.tau {
                    tuples.push(with_penalty(base, l1, l2, l3, tau));
                }
            }
        }
    }
    let init = start_point(gram, grid, base);
    let mut evaluated = evaluate_all(gram, tuples, init.as_ref());
    let best = pick_best(&evaluated, 0).ok_or(Error::AllFitsFailed)?;
    let (fit, estimate) = evaluated[best].1.take().expect("best tuple has a fit");
    Ok(TuneOutcome {
        records: evaluated.into_iter().map(|(r, _)| r).collect(),
        best,
        fit,
        estimate,
    })
}

/// Four successive line searches over `λ1`, `λ2`, `λ3`, `τ`. Each stage
/// fixes the values tuned so far and holds the rest at their anchors.
pub fn sequential_search_gram(gram: &GramCache, grid: &TuneGrid, base: &Hyperparams) -> Result<TuneOutcome> {
    grid.validate()?;
    let anchors = grid.anchors();
    let init = start_point(gram, grid, base);
    let mut current = [grid.lambda1[0], anchors.lambda2, anchors.lambda3, anchors.tau];
    let lists = [&grid.lambda1, &grid.lambda2, &grid.lambda3, &grid.tau];
    let mut all: Vec<Evaluated> = Vec::with_capacity(grid.cost());
    let mut stage_best = 0;
    for (stage, list) in lists.iter().enumerate() {
        let tuples = list
            .iter()
            .map(|&v| {
                let mut t = current;
                t[stage] = v;
                with_penalty(base, t[0], t[1], t[2], t[3])
            })
            .collect();
        let offset = all.len();
        let evaluated = evaluate_all(gram, tuples, init.as_ref());
        stage_best = pick_best(&evaluated, offset).ok_or(Error::AllFitsFailed)?;
        all.extend(evaluated);
        current[stage] = all[stage_best].0.key()[stage];
    }
    let (fit, estimate) = all[stage_best].1.take().expect("best tuple has a fit");
    Ok(TuneOutcome {
        records: all.into_iter().map(|(r, _)| r).collect(),
        best: stage_best,
        fit,
        estimate,
    })
}

/// Runs the search selected by `grid.mode`.
pub fn tune_gram(gram: &GramCache, grid: &TuneGrid, base: &Hyperparams) -> Result<TuneOutcome> {
    match grid.mode {
        SearchMode::FullGrid => grid_search_gram(gram, grid, base),
        SearchMode::Sequential => sequential_search_gram(gram, grid, base),
    }
}

fn centered_gram(data: &DataMatrix) -> Result<GramCache> {
    Ok(if data.is_centered() {
        gram(data)
    } else {
        gram(&data.center_columns()?)
    })
}

pub fn grid_search(data: &DataMatrix, grid: &TuneGrid, base: &Hyperparams) -> Result<TuneOutcome> {
    grid_search_gram(&centered_gram(data)?, grid, base)
}

pub fn sequential_search(data: &DataMatrix, grid: &TuneGrid, base: &Hyperparams) -> Result<TuneOutcome> {
    sequential_search_gram(&centered_gram(data)?, grid, base)
}

pub fn tune(data: &DataMatrix, grid: &TuneGrid, base: &Hyperparams) -> Result<TuneOutcome> {
    tune_gram(&centered_gram(data)?, grid, base)
}
