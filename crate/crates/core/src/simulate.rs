//! True colored precision matrices (star, cycle, grid) and seeded
//! multivariate normal sampling.
//!
//! Sampling uses ChaCha8 seeded from a `u64` and the ziggurat standard
//! normal of `rand_distr`, so a `(family, size, n, seed)` tuple yields the
//! same data on every platform.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ColoredGraph, DataMatrix, PrecisionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Star,
    Cycle,
    Grid,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Star => "star",
            Family::Cycle => "cycle",
            Family::Grid => "grid",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "star" => Ok(Family::Star),
            "cycle" => Ok(Family::Cycle),
            "grid" => Ok(Family::Grid),
            other => Err(Error::InvalidInput(format!(
                "unknown family '{other}' (expected star, cycle or grid)"
            ))),
        }
    }
}

/// One simulation setting. `size` is `p` for star and cycle graphs and the
/// lattice side `q` (so `p = q²`) for grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSpec {
    pub family: Family,
    pub size: usize,
    pub n: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let min = match self.family {
            Family::Star | Family::Cycle => 3,
            Family::Grid => 2,
        };
        if self.size < min {
            return Err(Error::InvalidInput(format!(
                "{} graphs need size >= {min}, got {}",
                self.family, self.size
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("sample size must be >= 2, got {}", self.n)));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        match self.family {
            Family::Grid => self.size * self.size,
            _ => self.size,
        }
    }
}

/// A true colored model: dense precision matrix plus its coloring.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub family: Family,
    pub size: usize,
    pub theta: DMatrix<f64>,
    pub graph: ColoredGraph,
}

impl TrueModel {
    pub fn p(&self) -> usize {
        self.theta.nrows()
    }

    pub fn params(&self) -> PrecisionParams {
        PrecisionParams::from_matrix(&self.theta).expect("true models have positive diagonals")
    }
}

fn check_size(family: Family, size: usize) -> Result<()> {
    SimSpec {
        family,
        size,
        n: 2,
        seed: 0,
    }
    .validate()
}

/// Star: leaves `1..p−1` with diagonal 1, hub `p` with diagonal 2, spokes 0.25.
pub fn star_precision(p: usize) -> Result<TrueModel> {
    check_size(Family::Star, p)?;
    let hub = p - 1;
    let mut theta = DMatrix::identity(p, p);
    theta[(hub, hub)] = 2.0;
    let mut spokes = Vec::with_capacity(p - 1);
    for i in 0..hub {
        theta[(i, hub)] = 0.25;
        theta[(hub, i)] = 0.25;
        spokes.push((i, hub));
    }
    let graph = ColoredGraph::new(p, vec![(0..hub).collect(), vec![hub]], vec![spokes])?;
    Ok(TrueModel {
        family: Family::Star,
        size: p,
        theta,
        graph,
    })
}

/// Cycle over `1..p` with closure edge `(1, p)`. With one-based labels the
/// diagonal is 1 at odd and 1.5 at even vertices; edge `(i−1, i)` is 0.5
/// when `i` is odd and 0.3 when even. The closure edge follows the same
/// rule with `i = p`.
pub fn cycle_precision(p: usize) -> Result<TrueModel> {
    check_size(Family::Cycle, p)?;
    let edge_value = |larger_label: usize| if larger_label % 2 == 1 { 0.5 } else { 0.3 };
    let mut theta = DMatrix::zeros(p, p);
    let (mut odd, mut even) = (Vec::new(), Vec::new());
    for v in 0..p {
        let label = v + 1;
        if label % 2 == 1 {
            theta[(v, v)] = 1.0;
            odd.push(v);
        } else {
            theta[(v, v)] = 1.5;
            even.push(v);
        }
    }
    let mut edges: Vec<((usize, usize), f64)> = (1..p).map(|v| ((v - 1, v), edge_value(v + 1))).collect();
    edges.push(((0, p - 1), edge_value(p)));
    let (mut heavy, mut light) = (Vec::new(), Vec::new());
    for &((a, b), value) in &edges {
        theta[(a, b)] = value;
        theta[(b, a)] = value;
        if value == 0.5 {
            heavy.push((a, b));
        } else {
            light.push((a, b));
        }
    }
    let edge_classes = [heavy, light].into_iter().filter(|c| !c.is_empty()).collect();
    let graph = ColoredGraph::new(p, vec![odd, even], edge_classes)?;
    Ok(TrueModel {
        family: Family::Cycle,
        size: p,
        theta,
        graph,
    })
}

/// `q × q` lattice numbered row-major; diagonal 3 at odd and 5 at even
/// one-based labels, 0.8 on every horizontal and vertical neighbour pair.
pub fn grid_precision(q: usize) -> Result<TrueModel> {
    check_size(Family::Grid, q)?;
    let p = q * q;
    let mut theta = DMatrix::zeros(p, p);
    let (mut odd, mut even) = (Vec::new(), Vec::new());
    for v in 0..p {
        if (v + 1) % 2 == 1 {
            theta[(v, v)] = 3.0;
            odd.push(v);
        } else {
            theta[(v, v)] = 5.0;
            even.push(v);
        }
    }
    let mut edges = Vec::new();
    for r in 0..q {
        for c in 0..q {
            let v = r * q + c;
            if c + 1 < q {
                edges.push((v, v + 1));
            }
            if r + 1 < q {
                edges.push((v, v + q));
            }
        }
    }
    for &(a, b) in &edges {
        theta[(a, b)] = 0.8;
        theta[(b, a)] = 0.8;
    }
    let graph = ColoredGraph::new(p, vec![odd, even], vec![edges])?;
    Ok(TrueModel {
        family: Family::Grid,
        size: q,
        theta,
        graph,
    })
}

pub fn true_model(family: Family, size: usize) -> Result<TrueModel> {
    match family {
        Family::Star => star_precision(size),
        Family::Cycle => cycle_precision(size),
        Family::Grid => grid_precision(size),
    }
}

pub fn smallest_eigenvalue(theta: &DMatrix<f64>) -> f64 {
    theta
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Draws `n` rows from `N(0, Θ⁻¹)` and centers them.
///
/// With `Θ = LLᵀ`, each row solves `Lᵀx = z` for a standard normal `z`,
/// so `Cov(x) = L⁻ᵀL⁻¹ = Θ⁻¹`.
pub fn sample_mvn(theta: &DMatrix<f64>, n: usize, seed: u64) -> Result<DataMatrix> {
    if !theta.is_square() {
        return Err(Error::InvalidInput("precision matrix must be square".into()));
    }
    let p = theta.nrows();
    let chol = theta.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // draws fill row by row
    let mut z = DMatrix::zeros(p, n);
    for i in 0..n {
        for j in 0..p {
            z[(j, i)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let upper = chol.l().transpose();
    let x = upper
        .solve_upper_triangular(&z)
        .ok_or(Error::NotPositiveDefinite)?
        .transpose();
    DataMatrix::new(x)?.center_columns()
}

/// Builds the true model for `spec` and samples its data.
pub fn simulate(spec: &SimSpec) -> Result<(TrueModel, DataMatrix)> {
    spec.validate()?;
    let truth = true_model(spec.family, spec.size)?;
    let data = sample_mvn(&truth.theta, spec.n, spec.seed)?;
    Ok((truth, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gram, num_pairs};

    fn assert_classes_partition_support(model: &TrueModel) {
        let p = model.p();
        let mask = model.graph.edge_mask();
        let params = model.params();
        for (idx, &b) in params.beta().iter().enumerate() {
            assert_eq!(b != 0.0, mask[idx]);
        }
        for class in &model.graph.vertex_classes {
            let v0 = model.theta[(class[0], class[0])];
            assert!(class.iter().all(|&v| model.theta[(v, v)] == v0));
        }
        for class in &model.graph.edge_classes {
            let e0 = model.theta[class[0]];
            assert!(class.iter().all(|&e| model.theta[e] == e0));
        }
        assert_eq!(model.theta, model.theta.transpose());
        assert_eq!(mask.len(), num_pairs(p));
    }

    #[test]
    fn star_structure() {
        let m = star_precision(10).unwrap();
        assert_eq!(m.graph.vertex_classes, vec![(0..9).collect::<Vec<_>>(), vec![9]]);
        assert_eq!(m.graph.edge_classes.len(), 1);
        assert_eq!(m.graph.edge_classes[0].len(), 9);
        assert_eq!(m.graph.df(), 3);
        assert_classes_partition_support(&m);

        let small = star_precision(3).unwrap();
        // Schur complement of the leaf block
        let schur = 2.0 - 2.0 * 0.25f64.powi(2);
        assert!((schur - 1.875).abs() < 1e-15);
        assert!(smallest_eigenvalue(&small.theta) > 0.0);
        assert!(star_precision(2).is_err());
    }

    #[test]
    fn cycle_structure() {
        let m = cycle_precision(4).unwrap();
        assert_eq!(m.theta[(0, 1)], 0.3);
        assert_eq!(m.theta[(1, 2)], 0.5);
        assert_eq!(m.theta[(2, 3)], 0.3);
        assert_eq!(m.theta[(0, 3)], 0.3);
        assert_eq!(m.theta[(0, 2)], 0.0);
        let m10 = cycle_precision(10).unwrap();
        assert_eq!(m10.graph.edges.len(), 10);
        assert_eq!(m10.graph.vertex_classes.len(), 2);
        assert_eq!(m10.graph.edge_classes.len(), 2);
        // alternating vertex colours
        assert_eq!(m10.graph.vertex_classes[0], vec![0, 2, 4, 6, 8]);
        assert_classes_partition_support(&m10);
        for p in 3..=30 {
            let m = cycle_precision(p).unwrap();
            assert!(smallest_eigenvalue(&m.theta) > 0.0, "p = {p}");
            assert_classes_partition_support(&m);
        }
    }

    #[test]
    fn grid_structure() {
        let m = grid_precision(2).unwrap();
        assert_eq!(m.graph.edges, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        let m4 = grid_precision(4).unwrap();
        assert_eq!(m4.p(), 16);
        assert_eq!(m4.graph.edges.len(), 24);
        assert_eq!(m4.graph.df(), 3);
        assert_classes_partition_support(&m4);
        for q in 2..=7 {
            assert!(smallest_eigenvalue(&grid_precision(q).unwrap().theta) > 0.0, "q = {q}");
        }
    }

    #[test]
    fn generators_are_pd_at_study_sizes() {
        for p in [10, 20, 30] {
            assert!(smallest_eigenvalue(&star_precision(p).unwrap().theta) > 0.0);
            assert!(smallest_eigenvalue(&cycle_precision(p).unwrap().theta) > 0.0);
        }
        for q in [3, 4, 5] {
            assert!(smallest_eigenvalue(&grid_precision(q).unwrap().theta) > 0.0);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let theta = star_precision(5).unwrap().theta;
        let a = sample_mvn(&theta, 50, 9).unwrap();
        let b = sample_mvn(&theta, 50, 9).unwrap();
        let c = sample_mvn(&theta, 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_centered());
    }

    #[test]
    fn identity_sample_covariance() {
        let data = sample_mvn(&DMatrix::identity(3, 3), 100_000, 1).unwrap();
        let cov = gram(&data).s() / 100_000.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn star_sample_precision_is_consistent() {
        let truth = star_precision(10).unwrap();
        let data = sample_mvn(&truth.theta, 100_000, 2).unwrap();
        let cov = gram(&data).s() / 100_000.0;
        let prec = cov.try_inverse().unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!((prec[(i, j)] - truth.theta[(i, j)]).abs() < 0.05, "({i},{j})");
            }
        }
    }

    #[test]
    fn rejects_non_pd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sample_mvn(&bad, 10, 0), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Star".parse::<Family>().unwrap(), Family::Star);
        assert!("tree".parse::<Family>().is_err());
        assert_eq!(Family::Grid.to_string(), "grid");
    }
}
