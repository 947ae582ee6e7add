//! Three-level solver for the truncated-L1 penalized composite likelihood.
//!
//! * outer: DC iterations, each linearizing the concave part of the
//!   truncated penalty around the previous iterate ([`fit`]);
//! * middle: method of multipliers on the slack reformulation of the
//!   resulting convex surrogate ([`alm_solve`]);
//! * inner: cyclic coordinate descent on the augmented Lagrangian
//!   ([`cd_solve`]). Diagonal coordinates solve a cubic by Brent's method,
//!   off-diagonal and slack coordinates have soft-threshold closed forms.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::likelihood::{
    active_sets, beta_residual, diag_residual, neighbour_quadratic, objective, ActiveSets,
};
use crate::model::{gram, pair_from_index, DataMatrix, GramCache, Hyperparams, PrecisionParams};
use crate::roots::brent;

/// Lower end of the bracket searched for a diagonal root.
const DIAG_BRACKET_LO: f64 = 1e-10;
/// Upper bracket doubling stops here.
const DIAG_BRACKET_CAP: f64 = (1u64 << 60) as f64;
/// ALM iterations with no residual decrease before giving up.
const ALM_STALL_LIMIT: usize = 5;

/// Slack variables and Lagrange multipliers of the augmented Lagrangian,
/// aligned with the pair lists of the [`ActiveSets`] that created them.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    /// `k_jj'` for each diagonal pair.
    pub diag_slack: Vec<f64>,
    /// `β_jj'` for each fusion pair.
    pub beta_slack: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub rho: f64,
}

impl AugmentedState {
    /// Slacks set to the current differences, linear multipliers zero,
    /// quadratic weights `b_init`.
    pub fn for_sets(sets: &ActiveSets, params: &PrecisionParams, b_init: f64, rho: f64) -> Self {
        let diag = params.diag();
        let beta = params.beta();
        let nd = sets.diag_pairs.len();
        let nb = sets.beta_pairs.len();
        Self {
            diag_slack: sets.diag_pairs.iter().map(|&(x, y)| diag[x] - diag[y]).collect(),
            beta_slack: sets.beta_pairs.iter().map(|&(x, y)| beta[x] - beta[y]).collect(),
            a: vec![0.0; nd],
            b: vec![b_init; nd],
            c: vec![0.0; nb],
            d: vec![b_init; nb],
            rho,
        }
    }

    pub fn check_matches(&self, sets: &ActiveSets) -> Result<()> {
        let nd = sets.diag_pairs.len();
        let nb = sets.beta_pairs.len();
        for len in [self.diag_slack.len(), self.a.len(), self.b.len()] {
            if len != nd {
                return Err(Error::DimensionMismatch { expected: nd, found: len });
            }
        }
        for len in [self.beta_slack.len(), self.c.len(), self.d.len()] {
            if len != nb {
                return Err(Error::DimensionMismatch { expected: nb, found: len });
            }
        }
        Ok(())
    }

    /// Largest absolute constraint residual.
    pub fn max_residual(&self, params: &PrecisionParams, sets: &ActiveSets) -> f64 {
        let d = (0..sets.diag_pairs.len()).map(|pos| diag_residual(params, self, sets, pos).abs());
        let b = (0..sets.beta_pairs.len()).map(|pos| beta_residual(params, self, sets, pos).abs());
        d.chain(b).fold(0.0, f64::max)
    }
}

/// Outcome of a full fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: PrecisionParams,
    /// Penalized objective at the starting point and after every DC iteration.
    pub objective_trace: Vec<f64>,
    /// Maximum constraint residual after every ALM iteration, across all DC iterations.
    pub residual_trace: Vec<f64>,
    /// Residual at the end of the last ALM solve.
    pub final_residual: f64,
    pub dc_iterations: usize,
    pub alm_iterations: usize,
    pub cd_sweeps: usize,
    pub alm_converged: bool,
    pub dc_converged: bool,
}

impl FitReport {
    pub fn converged(&self) -> bool {
        self.alm_converged && self.dc_converged
    }

    /// Largest increase between consecutive objective trace entries (0 for
    /// a nonincreasing trace).
    pub fn max_objective_increase(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// `sign(z)(|z| − γ)₊`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Coefficients of the cubic `2Bθ³ + 2Cθ² − θ − Q/n` whose positive root
/// zeroes the `θ_jj` partial derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagCubic {
    pub cubic: f64,
    pub quadratic: f64,
    pub constant: f64,
}

impl DiagCubic {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        ((self.cubic * t + self.quadratic) * t - 1.0) * t + self.constant
    }
}

pub fn diag_cubic(
    j: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    gram: &GramCache,
    sets: &ActiveSets,
) -> DiagCubic {
    let n = gram.n() as f64;
    let diag = params.diag();
    let mut weight = 0.0;
    let mut linear = gram.get(j, j) / (2.0 * n);
    for inc in sets.diag_incidence(j) {
        let (x, y) = sets.diag_pairs[inc.pos];
        let (a, b, k) = (state.a[inc.pos], state.b[inc.pos], state.diag_slack[inc.pos]);
        weight += b;
        if inc.first {
            linear += a - b * (diag[y] + k);
        } else {
            linear += -a - b * (diag[x] - k);
        }
    }
    DiagCubic {
        cubic: 2.0 * weight,
        quadratic: 2.0 * linear,
        constant: -neighbour_quadratic(params, gram, j) / n,
    }
}

/// Minimizes the augmented Lagrangian over `θ_jj` with everything else fixed.
///
/// The restriction to `θ_jj > 0` is strictly convex, so its derivative
/// (which shares its sign with the cubic) has exactly one positive zero.
pub fn update_diagonal(
    j: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    gram: &GramCache,
    sets: &ActiveSets,
) -> Result<f64> {
    let poly = diag_cubic(j, params, state, gram, sets);
    let lo = DIAG_BRACKET_LO;
    if poly.eval(lo) >= 0.0 {
        return Err(Error::NoPositiveRoot { index: j });
    }
    let mut hi = 1.0;
    while poly.eval(hi) <= 0.0 {
        hi *= 2.0;
        if hi > DIAG_BRACKET_CAP {
            return Err(Error::NoPositiveRoot { index: j });
        }
    }
    let lo = if hi > 1.0 { hi / 2.0 } else { lo };
    brent(|t| poly.eval(t), lo, hi, 0.0, 200).ok_or(Error::NoPositiveRoot { index: j })
}

/// The ratio `ẑ/r̂` pieces of the off-diagonal closed form.
pub fn beta_coefficients(
    j: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    gram: &GramCache,
    sets: &ActiveSets,
) -> (f64, f64) {
    let p = params.p();
    let n = gram.n() as f64;
    let (q, l) = pair_from_index(j, p).expect("index in range");
    let tq = params.diag()[q];
    let tl = params.diag()[l];
    let mut sum_q = 0.0;
    let mut sum_l = 0.0;
    for i in 0..p {
        if i == q || i == l {
            continue;
        }
        sum_q += gram.get(l, i) * params.entry(i, q);
        sum_l += gram.get(q, i) * params.entry(i, l);
    }
    let mut r = (gram.get(l, l) / tq + gram.get(q, q) / tl) / n;
    let mut z = -(gram.get(q, l) + sum_q / tq + gram.get(l, q) + sum_l / tl) / n;
    let beta = params.beta();
    for inc in sets.beta_incidence(j) {
        let (x, y) = sets.beta_pairs[inc.pos];
        let (c, d, s) = (state.c[inc.pos], state.d[inc.pos], state.beta_slack[inc.pos]);
        r += d;
        if inc.first {
            z += -c + d * (beta[y] + s);
        } else {
            z += c + d * (beta[x] - s);
        }
    }
    (z, r)
}

/// Closed-form off-diagonal update from its `(ẑ, r̂)` coefficients.
pub fn beta_from_coefficients(z: f64, r: f64, penalized: bool, lambda2: f64, tau: f64) -> f64 {
    if penalized {
        soft_threshold(z / r, lambda2 / (tau * r))
    } else {
        z / r
    }
}

/// Minimizes the augmented Lagrangian over `β_j`.
pub fn update_beta(
    j: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    gram: &GramCache,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    let (z, r) = beta_coefficients(j, params, state, gram, sets);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DegenerateCurvature { index: j, value: r });
    }
    Ok(beta_from_coefficients(z, r, sets.is_penalized(j), hyper.lambda2, hyper.tau))
}

/// Closed-form update of diagonal slack `pos`.
pub fn update_slack_k(
    pos: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> f64 {
    let (x, y) = sets.diag_pairs[pos];
    let (a, b) = (state.a[pos], state.b[pos]);
    let diff = params.diag()[x] - params.diag()[y];
    soft_threshold((a + b * diff) / b, hyper.lambda1 / (hyper.tau * b))
}

/// Closed-form update of fusion slack `pos`.
pub fn update_slack_beta(
    pos: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> f64 {
    let (x, y) = sets.beta_pairs[pos];
    let (c, d) = (state.c[pos], state.d[pos]);
    let diff = params.beta()[x] - params.beta()[y];
    soft_threshold((c + d * diff) / d, hyper.lambda3 / (hyper.tau * d))
}

/// Multiplier step: linear multipliers absorb the residuals, quadratic
/// weights grow by `ρ`.
pub fn update_multipliers(state: &AugmentedState, params: &PrecisionParams, sets: &ActiveSets) -> AugmentedState {
    let mut next = state.clone();
    for pos in 0..sets.diag_pairs.len() {
        next.a[pos] += state.b[pos] * diag_residual(params, state, sets, pos);
        next.b[pos] *= state.rho;
    }
    for pos in 0..sets.beta_pairs.len() {
        next.c[pos] += state.d[pos] * beta_residual(params, state, sets, pos);
        next.d[pos] *= state.rho;
    }
    next
}

/// One cyclic sweep: diagonals, off-diagonals, diagonal slacks, fusion
/// slacks, each in index order. Returns the largest coordinate change.
pub fn cd_sweep(
    params: &mut PrecisionParams,
    state: &mut AugmentedState,
    gram: &GramCache,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    let mut change: f64 = 0.0;
    for j in 0..params.p() {
        let new = update_diagonal(j, params, state, gram, sets)?;
        change = change.max((new - params.diag()[j]).abs());
        params.diag_mut()[j] = new;
    }
    for j in 0..params.beta().len() {
        let new = update_beta(j, params, state, gram, hyper, sets)?;
        change = change.max((new - params.beta()[j]).abs());
        params.beta_mut()[j] = new;
    }
    for pos in 0..sets.diag_pairs.len() {
        let new = update_slack_k(pos, params, state, hyper, sets);
        change = change.max((new - state.diag_slack[pos]).abs());
        state.diag_slack[pos] = new;
    }
    for pos in 0..sets.beta_pairs.len() {
        let new = update_slack_beta(pos, params, state, hyper, sets);
        change = change.max((new - state.beta_slack[pos]).abs());
        state.beta_slack[pos] = new;
    }
    Ok(change)
}

/// Coordinate descent on the augmented Lagrangian until the largest
/// coordinate change drops below `eps_cd` or `max_cd` sweeps. Slacks are
/// updated in place; returns the parameters and the sweep count.
pub fn cd_solve(
    sets: &ActiveSets,
    state: &mut AugmentedState,
    init: &PrecisionParams,
    gram: &GramCache,
    hyper: &Hyperparams,
) -> Result<(PrecisionParams, usize)> {
    state.check_matches(sets)?;
    let mut params = init.clone();
    for sweep in 1..=hyper.max_cd {
        let change = cd_sweep(&mut params, state, gram, hyper, sets)?;
        if change < hyper.eps_cd {
            return Ok((params, sweep));
        }
    }
    debug!("coordinate descent hit the sweep cap ({})", hyper.max_cd);
    Ok((params, hyper.max_cd))
}

/// Result of minimizing one convex surrogate.
#[derive(Debug, Clone)]
pub struct AlmOutcome {
    pub params: PrecisionParams,
    pub state: AugmentedState,
    pub residuals: Vec<f64>,
    pub cd_sweeps: usize,
    pub converged: bool,
}

/// Method of multipliers for the surrogate defined by `sets`, starting from `init`.
pub fn alm_solve(
    sets: &ActiveSets,
    init: &PrecisionParams,
    gram: &GramCache,
    hyper: &Hyperparams,
) -> Result<AlmOutcome> {
    let mut state = AugmentedState::for_sets(sets, init, hyper.b_init, hyper.rho);
    let mut params = init.clone();
    let mut residuals = Vec::new();
    let mut cd_sweeps = 0;
    if sets.has_no_constraints() {
        let (fitted, sweeps) = cd_solve(sets, &mut state, &params, gram, hyper)?;
        return Ok(AlmOutcome {
            params: fitted,
            state,
            residuals: vec![0.0],
            cd_sweeps: sweeps,
            converged: true,
        });
    }
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut converged = false;
    for _ in 0..hyper.max_alm {
        let (fitted, sweeps) = cd_solve(sets, &mut state, &params, gram, hyper)?;
        params = fitted;
        cd_sweeps += sweeps;
        let res = state.max_residual(&params, sets);
        residuals.push(res);
        if res < hyper.eps_alm {
            converged = true;
            break;
        }
        if res < best {
            best = res;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= ALM_STALL_LIMIT {
                warn!("constraint residual stalled at {res:.3e}");
                break;
            }
        }
        state = update_multipliers(&state, &params, sets);
    }
    Ok(AlmOutcome {
        params,
        state,
        residuals,
        cd_sweeps,
        converged,
    })
}

/// Starting point `θ_jj = n/S_jj`, `β = 0`.
pub fn default_init(gram: &GramCache) -> Result<PrecisionParams> {
    let n = gram.n() as f64;
    let p = gram.p();
    let mut diag = Vec::with_capacity(p);
    for j in 0..p {
        let s = gram.get(j, j);
        if !(s > 0.0) {
            return Err(Error::DegenerateColumn { column: j });
        }
        diag.push(n / s);
    }
    PrecisionParams::new(diag, vec![0.0; crate::model::num_pairs(p)])
}

/// Unpenalized composite-likelihood estimate; solver controls come from
/// `hyper`, its penalty weights are ignored. A good DC starting point.
pub fn penalty_free_fit(gram: &GramCache, hyper: &Hyperparams) -> Result<PrecisionParams> {
    let free = Hyperparams {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        ..*hyper
    };
    Ok(fit_gram(gram, &free, None)?.params)
}

/// Fits the penalized estimator to (centered) data.
pub fn fit(data: &DataMatrix, hyper: &Hyperparams, init: Option<&PrecisionParams>) -> Result<FitReport> {
    let centered;
    let data = if data.is_centered() {
        data
    } else {
        centered = data.center_columns()?;
        &centered
    };
    fit_gram(&gram(data), hyper, init)
}

/// [`fit`] on precomputed sufficient statistics.
pub fn fit_gram(gram: &GramCache, hyper: &Hyperparams, init: Option<&PrecisionParams>) -> Result<FitReport> {
    hyper.validate()?;
    let start = default_init(gram)?;
    let mut current = match init {
        Some(given) if given.p() != gram.p() => {
            return Err(Error::DimensionMismatch {
                expected: gram.p(),
                found: given.p(),
            })
        }
        Some(given) => given.clone(),
        None => start,
    };

    let mut objective_trace = vec![objective(&current, gram, hyper)?];
    let mut residual_trace = Vec::new();
    let mut final_residual = 0.0;
    let mut alm_iterations = 0;
    let mut cd_sweeps = 0;
    let mut alm_converged = true;
    let mut dc_converged = false;
    let mut dc_iterations = 0;
    let mut previous_sets: Option<ActiveSets> = None;
    let mut best: Option<(f64, PrecisionParams)> = None;

    for _ in 0..hyper.max_dc {
        let sets = active_sets(&current, hyper.tau).without_zero_weights(hyper);
        if previous_sets.as_ref() == Some(&sets) {
            // same surrogate as last time; its minimizer is `current`
            dc_converged = true;
            break;
        }
        let outcome = alm_solve(&sets, &current, gram, hyper)?;
        dc_iterations += 1;
        alm_iterations += outcome.residuals.len();
        cd_sweeps += outcome.cd_sweeps;
        final_residual = *outcome.residuals.last().unwrap_or(&0.0);
        residual_trace.extend_from_slice(&outcome.residuals);
        alm_converged &= outcome.converged;

        let value = objective(&outcome.params, gram, hyper)?;
        objective_trace.push(value);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, outcome.params.clone()));
        }
        let change = outcome.params.max_abs_diff(&current);
        current = outcome.params;
        previous_sets = Some(sets);
        if change < hyper.eps_dc {
            dc_converged = true;
            break;
        }
    }

    let params = match best {
        Some((_, best_params)) if !alm_converged => best_params,
        _ => current,
    };
    Ok(FitReport {
        params,
        objective_trace,
        residual_trace,
        final_residual,
        dc_iterations,
        alm_iterations,
        cd_sweeps,
        alm_converged,
        dc_converged,
    })
}
