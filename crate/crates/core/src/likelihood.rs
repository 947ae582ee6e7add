//! Composite log-likelihood of the Gaussian full conditionals, the
//! truncated-L1 penalized objective, its convex DC surrogate, and the
//! augmented Lagrangian with analytic partial derivatives.
//!
//! Everything is evaluated from the Gram matrix `S = XᵀX`; no pass over the
//! raw observations is needed after [`crate::model::gram`].

use crate::error::{Error, Result};
use crate::model::{all_pairs, num_pairs, pair_from_index, GramCache, Hyperparams, PrecisionParams};
use crate::optimizer::AugmentedState;

/// Penalty terms that remain in the convex surrogate built around a
/// previous iterate: the ones whose argument there was below `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSets {
    p: usize,
    /// Vertex pairs `(j, j')`, `j < j'`, with nearly equal diagonals.
    pub diag_pairs: Vec<(usize, usize)>,
    /// Off-diagonal slots that stay L1 penalized.
    pub zero_candidates: Vec<usize>,
    /// Off-diagonal slot pairs `(j, j')`, `j < j'`, with nearly equal values.
    pub beta_pairs: Vec<(usize, usize)>,
    penalized: Vec<bool>,
    diag_incidence: Vec<Vec<Incidence>>,
    beta_incidence: Vec<Vec<Incidence>>,
}

/// One constraint touching a coordinate: its position in the pair list and
/// whether the coordinate is the first (`j`) or second (`j'`) member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub pos: usize,
    pub first: bool,
}

impl ActiveSets {
    /// Builds the sets from explicit lists, sorting and validating them.
    pub fn from_parts(
        p: usize,
        mut diag_pairs: Vec<(usize, usize)>,
        mut zero_candidates: Vec<usize>,
        mut beta_pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let m = num_pairs(p);
        diag_pairs.sort_unstable();
        diag_pairs.dedup();
        zero_candidates.sort_unstable();
        zero_candidates.dedup();
        beta_pairs.sort_unstable();
        beta_pairs.dedup();
        if diag_pairs.iter().any(|&(a, b)| a >= b || b >= p)
            || zero_candidates.iter().any(|&j| j >= m)
            || beta_pairs.iter().any(|&(a, b)| a >= b || b >= m)
        {
            return Err(Error::InvalidInput("active set index out of range".into()));
        }
        let mut penalized = vec![false; m];
        for &j in &zero_candidates {
            penalized[j] = true;
        }
        let mut diag_incidence = vec![Vec::new(); p];
        for (pos, &(a, b)) in diag_pairs.iter().enumerate() {
            diag_incidence[a].push(Incidence { pos, first: true });
            diag_incidence[b].push(Incidence { pos, first: false });
        }
        let mut beta_incidence = vec![Vec::new(); m];
        for (pos, &(a, b)) in beta_pairs.iter().enumerate() {
            beta_incidence[a].push(Incidence { pos, first: true });
            beta_incidence[b].push(Incidence { pos, first: false });
        }
        Ok(Self {
            p,
            diag_pairs,
            zero_candidates,
            beta_pairs,
            penalized,
            diag_incidence,
            beta_incidence,
        })
    }

    pub fn empty(p: usize) -> Self {
        Self::from_parts(p, vec![], vec![], vec![]).expect("empty sets are valid")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn is_penalized(&self, beta_index: usize) -> bool {
        self.penalized[beta_index]
    }

    pub fn diag_incidence(&self, j: usize) -> &[Incidence] {
        &self.diag_incidence[j]
    }

    pub fn beta_incidence(&self, j: usize) -> &[Incidence] {
        &self.beta_incidence[j]
    }

    pub fn is_empty(&self) -> bool {
        self.diag_pairs.is_empty() && self.zero_candidates.is_empty() && self.beta_pairs.is_empty()
    }

    /// Drops the families whose penalty weight is zero; they add nothing to
    /// the surrogate.
    pub fn without_zero_weights(self, hyper: &Hyperparams) -> Self {
        let keep = |w: f64| w != 0.0;
        if keep(hyper.lambda1) && keep(hyper.lambda2) && keep(hyper.lambda3) {
            return self;
        }
        let p = self.p;
        let pick = |w: f64, v: Vec<_>| if keep(w) { v } else { Vec::new() };
        Self::from_parts(
            p,
            pick(hyper.lambda1, self.diag_pairs),
            if keep(hyper.lambda2) { self.zero_candidates } else { Vec::new() },
            pick(hyper.lambda3, self.beta_pairs),
        )
        .expect("subsets of valid sets")
    }

    /// True when no augmented-Lagrangian constraint exists.
    pub fn has_no_constraints(&self) -> bool {
        self.diag_pairs.is_empty() && self.beta_pairs.is_empty()
    }
}

/// Active sets around `prev` with strict `< tau` comparisons.
pub fn active_sets(prev: &PrecisionParams, tau: f64) -> ActiveSets {
    let p = prev.p();
    let diag = prev.diag();
    let beta = prev.beta();
    let diag_pairs = all_pairs(p)
        .into_iter()
        .filter(|&(a, b)| (diag[a] - diag[b]).abs() < tau)
        .collect();
    let zero_candidates = (0..beta.len()).filter(|&j| beta[j].abs() < tau).collect();
    let mut beta_pairs = Vec::new();
    for a in 0..beta.len() {
        for b in a + 1..beta.len() {
            if (beta[a] - beta[b]).abs() < tau {
                beta_pairs.push((a, b));
            }
        }
    }
    ActiveSets::from_parts(p, diag_pairs, zero_candidates, beta_pairs)
        .expect("indices generated in range")
}

fn check_dims(params: &PrecisionParams, gram: &GramCache) -> Result<()> {
    if params.p() != gram.p() {
        return Err(Error::DimensionMismatch {
            expected: gram.p(),
            found: params.p(),
        });
    }
    Ok(())
}

/// `Σ_{i≠j} θ_ij S_ij`.
pub(crate) fn cross_term(params: &PrecisionParams, gram: &GramCache, j: usize) -> f64 {
    (0..params.p())
        .filter(|&i| i != j)
        .map(|i| params.entry(i, j) * gram.get(i, j))
        .sum()
}

/// `Q_j = Σ_{k≠j} Σ_{l≠j} θ_kj θ_lj S_kl`, the squared norm of the
/// neighbourhood regression fit scaled by `θ_jj²`.
pub(crate) fn neighbour_quadratic(params: &PrecisionParams, gram: &GramCache, j: usize) -> f64 {
    let p = params.p();
    let w: Vec<f64> = (0..p)
        .map(|k| if k == j { 0.0 } else { params.entry(k, j) })
        .collect();
    let mut q = 0.0;
    for k in 0..p {
        if w[k] == 0.0 {
            continue;
        }
        let row: f64 = (0..p).map(|l| gram.get(k, l) * w[l]).sum();
        q += w[k] * row;
    }
    q
}

/// Composite log-likelihood `l_c(Θ)` (without the `−½ log 2π` constants).
pub fn composite_loglik(params: &PrecisionParams, gram: &GramCache) -> Result<f64> {
    check_dims(params, gram)?;
    let n = gram.n() as f64;
    let mut total = 0.0;
    for (j, &t) in params.diag().iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: j, value: t });
        }
        // θ_jj ||X_(j) − X B_j||² expanded through S
        let rss = t * gram.get(j, j)
            + 2.0 * cross_term(params, gram, j)
            + neighbour_quadratic(params, gram, j) / t;
        total += n * t.ln() - rss;
    }
    Ok(0.5 * total)
}

/// Truncated L1 function `J_τ(x) = min(x/τ, 1)`.
pub fn truncated_l1(x: f64, tau: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidInput(format!("truncated L1 argument must be >= 0, got {x}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be > 0, got {tau}")));
    }
    Ok((x / tau).min(1.0))
}

/// Visits every penalty argument as `(weight, |argument|)`.
fn for_each_penalty_term(params: &PrecisionParams, hyper: &Hyperparams, mut f: impl FnMut(f64, f64)) {
    let diag = params.diag();
    let beta = params.beta();
    if hyper.lambda1 != 0.0 {
        for a in 0..diag.len() {
            for b in a + 1..diag.len() {
                f(hyper.lambda1, (diag[a] - diag[b]).abs());
            }
        }
    }
    if hyper.lambda2 != 0.0 {
        for &b in beta {
            f(hyper.lambda2, b.abs());
        }
    }
    if hyper.lambda3 != 0.0 {
        for a in 0..beta.len() {
            for b in a + 1..beta.len() {
                f(hyper.lambda3, (beta[a] - beta[b]).abs());
            }
        }
    }
}

/// The truncated-L1 penalty part of the objective.
pub fn penalty(params: &PrecisionParams, hyper: &Hyperparams) -> f64 {
    let tau = hyper.tau;
    let mut total = 0.0;
    for_each_penalty_term(params, hyper, |w, x| total += w * (x / tau).min(1.0));
    total
}

/// Penalized objective `−l_c/n + penalty`.
pub fn objective(params: &PrecisionParams, gram: &GramCache, hyper: &Hyperparams) -> Result<f64> {
    Ok(-composite_loglik(params, gram)? / gram.n() as f64 + penalty(params, hyper))
}

/// Convex part of the DC split: the objective with untruncated L1 terms.
pub fn dc_convex_part(params: &PrecisionParams, gram: &GramCache, hyper: &Hyperparams) -> Result<f64> {
    let tau = hyper.tau;
    let mut pen = 0.0;
    for_each_penalty_term(params, hyper, |w, x| pen += w / tau * x);
    Ok(-composite_loglik(params, gram)? / gram.n() as f64 + pen)
}

/// Concave correction of the DC split: `Σ λ/τ (|x| − τ)₊`.
pub fn dc_concave_part(params: &PrecisionParams, hyper: &Hyperparams) -> f64 {
    let tau = hyper.tau;
    let mut total = 0.0;
    for_each_penalty_term(params, hyper, |w, x| total += w / tau * (x - tau).max(0.0));
    total
}

/// `f1(θ)` minus the affine minorant of `f2` taken at `prev`. Equals the
/// objective at `prev` and majorizes it everywhere.
pub fn dc_majorizer(
    params: &PrecisionParams,
    prev: &PrecisionParams,
    gram: &GramCache,
    hyper: &Hyperparams,
) -> Result<f64> {
    let tau = hyper.tau;
    let mut current = Vec::new();
    for_each_penalty_term(params, hyper, |w, x| current.push((w, x)));
    let mut linear = dc_concave_part(prev, hyper);
    let mut k = 0;
    for_each_penalty_term(prev, hyper, |w, x_prev| {
        if x_prev >= tau {
            linear += w / tau * (current[k].1 - x_prev);
        }
        k += 1;
    });
    Ok(dc_convex_part(params, gram, hyper)? - linear)
}

/// Convex surrogate: data term plus the active-set L1 terms with weights `λ/τ`.
pub fn surrogate(
    params: &PrecisionParams,
    gram: &GramCache,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    check_dims(params, gram)?;
    let tau = hyper.tau;
    let diag = params.diag();
    let beta = params.beta();
    let mut pen = 0.0;
    pen += hyper.lambda1 / tau
        * sets
            .diag_pairs
            .iter()
            .map(|&(a, b)| (diag[a] - diag[b]).abs())
            .sum::<f64>();
    pen += hyper.lambda2 / tau * sets.zero_candidates.iter().map(|&j| beta[j].abs()).sum::<f64>();
    pen += hyper.lambda3 / tau
        * sets
            .beta_pairs
            .iter()
            .map(|&(a, b)| (beta[a] - beta[b]).abs())
            .sum::<f64>();
    Ok(-composite_loglik(params, gram)? / gram.n() as f64 + pen)
}

/// Constant that turns the surrogate into the DC majorizer: each saturated
/// (inactive) term contributes its full weight `λ`.
pub fn surrogate_offset(sets: &ActiveSets, hyper: &Hyperparams) -> f64 {
    let p = sets.p();
    let m = num_pairs(p);
    let inactive_diag = num_pairs(p) - sets.diag_pairs.len();
    let inactive_zero = m - sets.zero_candidates.len();
    let inactive_fuse = num_pairs(m) - sets.beta_pairs.len();
    hyper.lambda1 * inactive_diag as f64
        + hyper.lambda2 * inactive_zero as f64
        + hyper.lambda3 * inactive_fuse as f64
}

/// Residual `θ_jj − θ_j'j' − k_jj'` of diagonal constraint `pos`.
#[inline]
pub fn diag_residual(params: &PrecisionParams, state: &AugmentedState, sets: &ActiveSets, pos: usize) -> f64 {
    let (a, b) = sets.diag_pairs[pos];
    params.diag()[a] - params.diag()[b] - state.diag_slack[pos]
}

/// Residual `β_j − β_j' − β_jj'` of fusion constraint `pos`.
#[inline]
pub fn beta_residual(params: &PrecisionParams, state: &AugmentedState, sets: &ActiveSets, pos: usize) -> f64 {
    let (a, b) = sets.beta_pairs[pos];
    params.beta()[a] - params.beta()[b] - state.beta_slack[pos]
}

/// Augmented Lagrangian of the slack reformulation of the surrogate.
pub fn augmented_value(
    params: &PrecisionParams,
    state: &AugmentedState,
    gram: &GramCache,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    check_dims(params, gram)?;
    state.check_matches(sets)?;
    let tau = hyper.tau;
    let beta = params.beta();
    let mut value = -composite_loglik(params, gram)? / gram.n() as f64;
    value += hyper.lambda1 / tau * state.diag_slack.iter().map(|k| k.abs()).sum::<f64>();
    value += hyper.lambda2 / tau * sets.zero_candidates.iter().map(|&j| beta[j].abs()).sum::<f64>();
    value += hyper.lambda3 / tau * state.beta_slack.iter().map(|s| s.abs()).sum::<f64>();
    for pos in 0..sets.diag_pairs.len() {
        let r = diag_residual(params, state, sets, pos);
        value += state.a[pos] * r + 0.5 * state.b[pos] * r * r;
    }
    for pos in 0..sets.beta_pairs.len() {
        let r = beta_residual(params, state, sets, pos);
        value += state.c[pos] * r + 0.5 * state.d[pos] * r * r;
    }
    Ok(value)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Partial derivative of [`augmented_value`] with respect to `θ_jj`.
pub fn grad_diag(
    j: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    gram: &GramCache,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    let _ = hyper;
    check_dims(params, gram)?;
    state.check_matches(sets)?;
    let n = gram.n() as f64;
    let t = params.diag()[j];
    if !(t > 0.0) {
        return Err(Error::NonPositiveDiagonal { index: j, value: t });
    }
    let q = neighbour_quadratic(params, gram, j);
    let mut g = -q / (2.0 * n * t * t) - 0.5 / t + gram.get(j, j) / (2.0 * n);
    for inc in sets.diag_incidence(j) {
        let (a, b) = sets.diag_pairs[inc.pos];
        let (mult, weight, k) = (state.a[inc.pos], state.b[inc.pos], state.diag_slack[inc.pos]);
        if inc.first {
            let other = params.diag()[b];
            g += weight * t + mult - weight * (other + k);
        } else {
            let other = params.diag()[a];
            g += weight * t - mult - weight * (other - k);
        }
    }
    Ok(g)
}

/// Partial derivative of the data term `−l_c/n` with respect to off-diagonal
/// slot `j = (q, l)`.
pub(crate) fn data_grad_beta(params: &PrecisionParams, gram: &GramCache, j: usize) -> f64 {
    let p = params.p();
    let n = gram.n() as f64;
    let (q, l) = pair_from_index(j, p).expect("index in range");
    let tq = params.diag()[q];
    let tl = params.diag()[l];
    let b = params.beta()[j];
    let mut sum_q = 0.0;
    let mut sum_l = 0.0;
    for i in 0..p {
        if i == q || i == l {
            continue;
        }
        sum_q += gram.get(l, i) * params.entry(i, q);
        sum_l += gram.get(q, i) * params.entry(i, l);
    }
    (gram.get(l, l) * b / tq + gram.get(q, l) + sum_q / tq + gram.get(q, q) * b / tl
        + gram.get(l, q)
        + sum_l / tl)
        / n
}

/// Partial derivative of [`augmented_value`] with respect to `β_j`.
///
/// For penalized slots (`j ∈ V_o`) the L1 term contributes `λ2/τ · sign(β_j)`;
/// at `β_j = 0` that term is taken as zero, so only call this away from kinks.
pub fn grad_beta(
    j: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    gram: &GramCache,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    check_dims(params, gram)?;
    state.check_matches(sets)?;
    if j >= params.beta().len() {
        return Err(Error::InvalidInput(format!("off-diagonal index {j} out of range")));
    }
    let mut g = data_grad_beta(params, gram, j);
    if sets.is_penalized(j) {
        g += hyper.lambda2 / hyper.tau * sign(params.beta()[j]);
    }
    for inc in sets.beta_incidence(j) {
        let r = beta_residual(params, state, sets, inc.pos);
        let term = state.c[inc.pos] + state.d[inc.pos] * r;
        if inc.first {
            g += term;
        } else {
            g -= term;
        }
    }
    Ok(g)
}

/// Partial derivative with respect to the diagonal slack of constraint `pos`.
pub fn grad_diag_slack(
    pos: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    state.check_matches(sets)?;
    let r = diag_residual(params, state, sets, pos);
    Ok(hyper.lambda1 / hyper.tau * sign(state.diag_slack[pos]) - state.a[pos] - state.b[pos] * r)
}

/// Partial derivative with respect to the fusion slack of constraint `pos`.
pub fn grad_beta_slack(
    pos: usize,
    params: &PrecisionParams,
    state: &AugmentedState,
    hyper: &Hyperparams,
    sets: &ActiveSets,
) -> Result<f64> {
    state.check_matches(sets)?;
    let r = beta_residual(params, state, sets, pos);
    Ok(hyper.lambda3 / hyper.tau * sign(state.beta_slack[pos]) - state.c[pos] - state.d[pos] * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gram, DataMatrix};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
        DataMatrix::new(x).unwrap().center_columns().unwrap()
    }

    fn random_params(p: usize, rng: &mut ChaCha8Rng) -> PrecisionParams {
        let diag = (0..p).map(|_| rng.random_range(0.5..2.5)).collect();
        let beta = (0..num_pairs(p)).map(|_| rng.random_range(-0.4..0.4)).collect();
        PrecisionParams::new(diag, beta).unwrap()
    }

    /// Per-sample definition of the composite log-likelihood.
    fn brute_loglik(params: &PrecisionParams, data: &DataMatrix) -> f64 {
        let x = data.values();
        let mut total = 0.0;
        for j in 0..params.p() {
            let t = params.diag()[j];
            for k in 0..data.n() {
                let mut inner = x[(k, j)];
                for i in 0..params.p() {
                    if i != j {
                        inner += params.entry(i, j) * x[(k, i)] / t;
                    }
                }
                total += 0.5 * t.ln() - 0.5 * t * inner * inner;
            }
        }
        total
    }

    #[test]
    fn loglik_identity_is_minus_half_trace() {
        let data = random_data(12, 3, 1);
        let g = gram(&data);
        let l = composite_loglik(&PrecisionParams::identity(3), &g).unwrap();
        assert!((l + 0.5 * g.s().trace()).abs() < 1e-12);
    }

    #[test]
    fn loglik_two_by_two_example() {
        let g = GramCache::from_matrix(DMatrix::identity(2, 2), 4).unwrap();
        let l = composite_loglik(&PrecisionParams::identity(2), &g).unwrap();
        assert!((l + 1.0).abs() < 1e-15);
    }

    #[test]
    fn loglik_matches_per_sample_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, p) in &[(20, 4), (50, 8), (30, 2), (45, 6)] {
            let data = random_data(n, p, rng.random());
            let g = gram(&data);
            let params = random_params(p, &mut rng);
            let fast = composite_loglik(&params, &g).unwrap();
            let slow = brute_loglik(&params, &data);
            assert!((fast - slow).abs() <= 1e-8 * slow.abs(), "{fast} vs {slow}");
        }
    }

    #[test]
    fn loglik_rejects_nonpositive_diagonal() {
        let g = GramCache::from_matrix(DMatrix::identity(2, 2), 4).unwrap();
        let mut params = PrecisionParams::identity(2);
        params.diag_mut()[1] = -1.0;
        assert!(matches!(
            composite_loglik(&params, &g),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn truncated_l1_examples() {
        assert_eq!(truncated_l1(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(truncated_l1(0.3, 0.3).unwrap(), 1.0);
        assert_eq!(truncated_l1(0.15, 0.3).unwrap(), 0.5);
        assert_eq!(truncated_l1(7.0, 0.3).unwrap(), 1.0);
        assert!(truncated_l1(-0.1, 0.3).is_err());
    }

    #[test]
    fn objective_reductions() {
        let data = random_data(15, 3, 3);
        let g = gram(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = random_params(3, &mut rng);
        let free = Hyperparams::with_penalty(0.0, 0.0, 0.0, 0.5);
        let lc = composite_loglik(&params, &g).unwrap();
        assert!((objective(&params, &g, &free).unwrap() + lc / 15.0).abs() < 1e-14);

        let g2 = GramCache::from_matrix(DMatrix::identity(2, 2), 4).unwrap();
        let flat = PrecisionParams::new(vec![1.3, 1.3], vec![0.0]).unwrap();
        let heavy = Hyperparams::with_penalty(5.0, 5.0, 5.0, 0.2);
        assert_eq!(penalty(&flat, &heavy), 0.0);
        assert_eq!(
            objective(&flat, &g2, &heavy).unwrap(),
            -composite_loglik(&flat, &g2).unwrap() / 4.0
        );
    }

    #[test]
    fn objective_matches_term_by_term_sum() {
        let data = random_data(25, 3, 9);
        let g = gram(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let params = random_params(3, &mut rng);
        let hyper = Hyperparams::with_penalty(1.0, 1.0, 1.0, 0.5);
        let d = params.diag();
        let b = params.beta();
        let mut expected = -composite_loglik(&params, &g).unwrap() / 25.0;
        for (x, y) in [(0, 1), (0, 2), (1, 2)] {
            expected += truncated_l1((d[x] - d[y]).abs(), 0.5).unwrap();
        }
        for v in b {
            expected += truncated_l1(v.abs(), 0.5).unwrap();
        }
        for (x, y) in [(0, 1), (0, 2), (1, 2)] {
            expected += truncated_l1((b[x] - b[y]).abs(), 0.5).unwrap();
        }
        assert!((objective(&params, &g, &hyper).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn active_set_examples() {
        let prev = PrecisionParams::new(vec![1.0, 1.05, 2.0], vec![0.1, 0.15, 0.5]).unwrap();
        let sets = active_sets(&prev, 0.1);
        assert_eq!(sets.diag_pairs, vec![(0, 1)]);
        assert_eq!(sets.beta_pairs, vec![(0, 1)]);
        assert!(sets.zero_candidates.is_empty());

        let prev = PrecisionParams::new(vec![1.0, 1.0, 1.0], vec![0.0, 0.3, 0.7]).unwrap();
        let sets = active_sets(&prev, 0.2);
        assert_eq!(sets.zero_candidates, vec![0]);

        // strict inequality at the boundary
        let prev = PrecisionParams::new(vec![1.0, 1.5], vec![0.5]).unwrap();
        let sets = active_sets(&prev, 0.5);
        assert!(sets.diag_pairs.is_empty());
        assert!(sets.zero_candidates.is_empty());
    }

    #[test]
    fn surrogate_examples() {
        let data = random_data(10, 3, 11);
        let g = gram(&data);
        let params = PrecisionParams::new(vec![1.0, 1.3, 2.0], vec![0.2, 0.0, -0.1]).unwrap();
        let hyper = Hyperparams::with_penalty(1.0, 0.4, 0.3, 0.5);
        let lc = composite_loglik(&params, &g).unwrap();
        let empty = ActiveSets::empty(3);
        assert!((surrogate(&params, &g, &hyper, &empty).unwrap() + lc / 10.0).abs() < 1e-14);

        let single = ActiveSets::from_parts(3, vec![(0, 1)], vec![], vec![]).unwrap();
        let h2 = Hyperparams::with_penalty(1.0, 0.0, 0.0, 0.5);
        let s = surrogate(&params, &g, &h2, &single).unwrap();
        assert!((s - (-lc / 10.0 + 0.6)).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_families_are_dropped() {
        let sets = full_sets(3);
        let kept = sets.clone().without_zero_weights(&Hyperparams::with_penalty(0.1, 0.1, 0.1, 0.2));
        assert_eq!(kept, sets);
        let pruned = sets.without_zero_weights(&Hyperparams::with_penalty(0.0, 0.1, 0.0, 0.2));
        assert!(pruned.diag_pairs.is_empty() && pruned.beta_pairs.is_empty());
        assert_eq!(pruned.zero_candidates.len(), 3);
        assert!(pruned.has_no_constraints());
    }

    #[test]
    fn dc_majorizer_touches_and_majorizes() {
        let data = random_data(40, 4, 21);
        let g = gram(&data);
        let hyper = Hyperparams::with_penalty(0.3, 0.2, 0.1, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let prev = random_params(4, &mut rng);
            let sets = active_sets(&prev, hyper.tau);
            let offset = surrogate_offset(&sets, &hyper);
            let f_prev = objective(&prev, &g, &hyper).unwrap();
            // objective = f1 − f2
            let split = dc_convex_part(&prev, &g, &hyper).unwrap() - dc_concave_part(&prev, &hyper);
            assert!((split - f_prev).abs() < 1e-10);
            // two routes to the majorizer agree at the expansion point
            let maj = dc_majorizer(&prev, &prev, &g, &hyper).unwrap();
            let sur = surrogate(&prev, &g, &hyper, &sets).unwrap() + offset;
            assert!((maj - f_prev).abs() < 1e-10);
            assert!((sur - f_prev).abs() < 1e-10);
            for _ in 0..10 {
                let probe = random_params(4, &mut rng);
                let maj = dc_majorizer(&probe, &prev, &g, &hyper).unwrap();
                let sur = surrogate(&probe, &g, &hyper, &sets).unwrap() + offset;
                let f = objective(&probe, &g, &hyper).unwrap();
                assert!((maj - sur).abs() < 1e-10);
                assert!(sur >= f - 1e-10);
            }
        }
    }

    fn random_state(sets: &ActiveSets, rng: &mut ChaCha8Rng) -> AugmentedState {
        let nd = sets.diag_pairs.len();
        let nb = sets.beta_pairs.len();
        let mut gen = |len: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..len).map(|_| rng.random_range(lo..hi)).collect()
        };
        AugmentedState {
            diag_slack: gen(nd, -0.5, 0.5),
            beta_slack: gen(nb, -0.5, 0.5),
            a: gen(nd, -1.0, 1.0),
            b: gen(nd, 0.5, 3.0),
            c: gen(nb, -1.0, 1.0),
            d: gen(nb, 0.5, 3.0),
            rho: 2.0,
        }
    }

    fn full_sets(p: usize) -> ActiveSets {
        let m = num_pairs(p);
        ActiveSets::from_parts(p, all_pairs(p), (0..m).collect(), all_pairs(m)).unwrap()
    }

    #[test]
    fn augmented_value_examples() {
        let data = random_data(10, 3, 31);
        let g = gram(&data);
        let params = PrecisionParams::new(vec![1.2, 1.0, 2.0], vec![0.2, 0.0, -0.1]).unwrap();
        let hyper = Hyperparams::with_penalty(0.5, 0.2, 0.3, 0.4);
        let sets = ActiveSets::from_parts(3, vec![(0, 1)], vec![1], vec![(0, 2)]).unwrap();
        let base_state = AugmentedState {
            diag_slack: vec![0.2],
            beta_slack: vec![0.3],
            a: vec![0.0],
            b: vec![1.0],
            c: vec![0.0],
            d: vec![1.0],
            rho: 2.0,
        };
        let slack_form = -composite_loglik(&params, &g).unwrap() / 10.0
            + 0.5 / 0.4 * 0.2
            + 0.3 / 0.4 * 0.3;
        let v = augmented_value(&params, &base_state, &g, &hyper, &sets).unwrap();
        assert!((v - slack_form).abs() < 1e-12);

        let mut st = base_state.clone();
        st.diag_slack[0] = 0.0; // residual 0.2
        st.a[0] = 1.0;
        st.b[0] = 10.0;
        let v2 = augmented_value(&params, &st, &g, &hyper, &sets).unwrap();
        let expected = slack_form - 0.5 / 0.4 * 0.2 + 1.0 * 0.2 + 5.0 * 0.04;
        assert!((v2 - expected).abs() < 1e-12);

        let mut bad = base_state;
        bad.c.push(0.0);
        assert!(augmented_value(&params, &bad, &g, &hyper, &sets).is_err());
    }

    #[test]
    fn augmented_value_matches_independent_sum() {
        let data = random_data(30, 4, 41);
        let g = gram(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params = random_params(4, &mut rng);
        let sets = full_sets(4);
        let st = random_state(&sets, &mut rng);
        let hyper = Hyperparams::with_penalty(0.3, 0.2, 0.1, 0.3);
        let th = params.to_matrix();
        let mut expected = -brute_loglik(&params, &data) / 30.0;
        for (pos, &(x, y)) in sets.diag_pairs.iter().enumerate() {
            let r = th[(x, x)] - th[(y, y)] - st.diag_slack[pos];
            expected += 0.3 / 0.3 * st.diag_slack[pos].abs() + st.a[pos] * r + 0.5 * st.b[pos] * r * r;
        }
        for j in 0..6 {
            expected += 0.2 / 0.3 * params.beta()[j].abs();
        }
        for (pos, &(x, y)) in sets.beta_pairs.iter().enumerate() {
            let r = params.beta()[x] - params.beta()[y] - st.beta_slack[pos];
            expected += 0.1 / 0.3 * st.beta_slack[pos].abs() + st.c[pos] * r + 0.5 * st.d[pos] * r * r;
        }
        let v = augmented_value(&params, &st, &g, &hyper, &sets).unwrap();
        assert!((v - expected).abs() < 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn grad_diag_reduces_to_closed_form() {
        let data = random_data(100, 3, 51);
        let g = gram(&data);
        let mut params = PrecisionParams::identity(3);
        let sets = ActiveSets::empty(3);
        let st = AugmentedState::for_sets(&sets, &params, 1.0, 2.0);
        let hyper = Hyperparams::default();
        let t = params.diag()[1];
        let gd = grad_diag(1, &params, &st, &g, &hyper, &sets).unwrap();
        assert!((gd - (-0.5 / t + g.get(1, 1) / 200.0)).abs() < 1e-14);
        params.diag_mut()[1] = 100.0 / g.get(1, 1);
        let gd = grad_diag(1, &params, &st, &g, &hyper, &sets).unwrap();
        assert!(gd.abs() < 1e-14);
    }

    #[test]
    fn grad_diag_permutation_symmetry() {
        // variables 0 and 1 exchangeable: swapping their columns swaps gradients
        let data = random_data(20, 3, 61);
        let swapped = data.permute_columns(&[1, 0, 2]).unwrap();
        let g = gram(&data);
        let gs = gram(&swapped);
        let params = PrecisionParams::new(vec![1.1, 1.7, 0.9], vec![0.1, 0.2, 0.2]).unwrap();
        let swapped_params = PrecisionParams::new(vec![1.7, 1.1, 0.9], vec![0.1, 0.2, 0.2]).unwrap();
        let sets = ActiveSets::empty(3);
        let st = AugmentedState::for_sets(&sets, &params, 1.0, 2.0);
        let h = Hyperparams::default();
        let a0 = grad_diag(0, &params, &st, &g, &h, &sets).unwrap();
        let a1 = grad_diag(1, &params, &st, &g, &h, &sets).unwrap();
        let b0 = grad_diag(0, &swapped_params, &st, &gs, &h, &sets).unwrap();
        let b1 = grad_diag(1, &swapped_params, &st, &gs, &h, &sets).unwrap();
        assert!((a0 - b1).abs() < 1e-12 && (a1 - b0).abs() < 1e-12);
    }

    /// Central-difference check of every analytic partial derivative.
    fn check_all_gradients(seed: u64) {
        let p = 4;
        let data = random_data(40, p, seed);
        let g = gram(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let params = random_params(p, &mut rng);
        let sets = full_sets(p);
        let st = random_state(&sets, &mut rng);
        let hyper = Hyperparams::with_penalty(0.3, 0.2, 0.1, 0.3);
        let h = 1e-5;
        let f = |pp: &PrecisionParams, ss: &AugmentedState| augmented_value(pp, ss, &g, &hyper, &sets).unwrap();
        let close = |analytic: f64, numeric: f64| {
            assert!(
                (analytic - numeric).abs() / (1.0 + analytic.abs()) < 1e-6,
                "analytic {analytic} numeric {numeric}"
            );
        };
        for j in 0..p {
            let mut up = params.clone();
            up.diag_mut()[j] += h;
            let mut dn = params.clone();
            dn.diag_mut()[j] -= h;
            let numeric = (f(&up, &st) - f(&dn, &st)) / (2.0 * h);
            close(grad_diag(j, &params, &st, &g, &hyper, &sets).unwrap(), numeric);
        }
        for j in 0..num_pairs(p) {
            let mut up = params.clone();
            up.beta_mut()[j] += h;
            let mut dn = params.clone();
            dn.beta_mut()[j] -= h;
            let numeric = (f(&up, &st) - f(&dn, &st)) / (2.0 * h);
            close(grad_beta(j, &params, &st, &g, &hyper, &sets).unwrap(), numeric);
        }
        for pos in 0..sets.diag_pairs.len() {
            let mut up = st.clone();
            up.diag_slack[pos] += h;
            let mut dn = st.clone();
            dn.diag_slack[pos] -= h;
            let numeric = (f(&params, &up) - f(&params, &dn)) / (2.0 * h);
            close(grad_diag_slack(pos, &params, &st, &hyper, &sets).unwrap(), numeric);
        }
        for pos in 0..sets.beta_pairs.len() {
            let mut up = st.clone();
            up.beta_slack[pos] += h;
            let mut dn = st.clone();
            dn.beta_slack[pos] -= h;
            let numeric = (f(&params, &up) - f(&params, &dn)) / (2.0 * h);
            close(grad_beta_slack(pos, &params, &st, &hyper, &sets).unwrap(), numeric);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            check_all_gradients(100 + seed);
        }
    }
}
