//! Accuracy measures of an estimate against a true colored model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{num_pairs, pair_index, ColoredGraph, PrecisionParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
    pub d0: f64,
    /// One entry per true vertex class.
    pub d_vertex: Vec<f64>,
    /// One entry per true edge class.
    pub d_edge: Vec<f64>,
    pub acc_all: f64,
}

/// Normalized squared Frobenius error `‖Θ̂ − Θ‖²_F / ‖Θ‖²_F`.
pub fn mse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows(),
            found: estimate.nrows(),
        });
    }
    Ok((estimate - truth).norm_squared() / truth.norm_squared())
}

/// Nonzero mask over off-diagonal slots, with `|β| < eps_zero` read as zero.
pub fn support(params: &PrecisionParams, eps_zero: f64) -> Vec<bool> {
    params.beta().iter().map(|b| b.abs() >= eps_zero).collect()
}

/// `(TP, FP, FN, F1)` over off-diagonal slots. Two empty supports score 1.
pub fn f1_score(estimate: &[bool], truth: &[bool]) -> Result<(usize, usize, usize, f64)> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&e, &t) in estimate.iter().zip(truth) {
        match (e, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Ok((tp, fp, fn_, f1))
}

/// Fraction of off-diagonal slots whose zero/nonzero status is correct.
pub fn d0(estimate: &[bool], truth: &[bool]) -> f64 {
    let correct = estimate.iter().zip(truth).filter(|(e, t)| e == t).count();
    correct as f64 / truth.len().max(1) as f64
}

/// Vertex-class accuracy: over ordered pairs `(j, j')` with `j` in the
/// class, counts ties inside the class and separations across it.
pub fn d_vertex_class(diag: &[f64], class: &[usize], eps_merge: f64) -> f64 {
    let p = diag.len();
    if p < 2 || class.is_empty() {
        return 1.0;
    }
    let mut inside = vec![false; p];
    for &v in class {
        inside[v] = true;
    }
    let mut hits = 0usize;
    for &j in class {
        for k in 0..p {
            if k == j {
                continue;
            }
            let equal = (diag[j] - diag[k]).abs() <= eps_merge;
            if equal == inside[k] {
                hits += 1;
            }
        }
    }
    hits as f64 / (class.len() * (p - 1)) as f64
}

/// Edge-class accuracy over off-diagonal slots (`class` holds slot
/// indices). Two slots both read as zero count as equal.
pub fn d_edge_class(beta: &[f64], class: &[usize], eps_zero: f64, eps_merge: f64) -> f64 {
    let m = beta.len();
    if m < 2 || class.is_empty() {
        return 1.0;
    }
    let mut inside = vec![false; m];
    for &s in class {
        inside[s] = true;
    }
    let equal = |a: f64, b: f64| {
        let (za, zb) = (a.abs() < eps_zero, b.abs() < eps_zero);
        if za || zb {
            za && zb
        } else {
            (a - b).abs() <= eps_merge
        }
    };
    let mut hits = 0usize;
    for &s in class {
        for t in 0..m {
            if t != s && equal(beta[s], beta[t]) == inside[t] {
                hits += 1;
            }
        }
    }
    hits as f64 / (class.len() * (m - 1)) as f64
}

/// Mean of `d0` and every class accuracy.
pub fn acc_all(d0: f64, d_vertex: &[f64], d_edge: &[f64]) -> f64 {
    let total: f64 = d0 + d_vertex.iter().sum::<f64>() + d_edge.iter().sum::<f64>();
    total / (1 + d_vertex.len() + d_edge.len()) as f64
}

/// All measures for `estimate` against the truth `(theta, graph)`.
pub fn evaluate(
    estimate: &PrecisionParams,
    truth_theta: &DMatrix<f64>,
    truth_graph: &ColoredGraph,
    eps_zero: f64,
    eps_merge: f64,
) -> Result<MetricsReport> {
    let p = truth_graph.p;
    if estimate.p() != p || truth_theta.nrows() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: estimate.p(),
        });
    }
    let mse = mse(&estimate.to_matrix(), truth_theta)?;
    let est_support = support(estimate, eps_zero);
    let true_support = truth_graph.edge_mask();
    debug_assert_eq!(true_support.len(), num_pairs(p));
    let (tp, fp, fn_, f1) = f1_score(&est_support, &true_support)?;
    let d0 = d0(&est_support, &true_support);
    let d_vertex: Vec<f64> = truth_graph
        .vertex_classes
        .iter()
        .map(|class| d_vertex_class(estimate.diag(), class, eps_merge))
        .collect();
    let d_edge = truth_graph
        .edge_classes
        .iter()
        .map(|class| {
            let slots: Vec<usize> = class.iter().map(|&(q, l)| pair_index(q, l, p)).collect::<Result<_>>()?;
            Ok(d_edge_class(estimate.beta(), &slots, eps_zero, eps_merge))
        })
        .collect::<Result<Vec<f64>>>()?;
    let acc_all = acc_all(d0, &d_vertex, &d_edge);
    Ok(MetricsReport {
        mse,
        tp,
        fp,
        fn_,
        f1,
        d0,
        d_vertex,
        d_edge,
        acc_all,
    })
}
