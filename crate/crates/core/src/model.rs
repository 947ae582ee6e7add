//! Core domain types: observations, sufficient statistics, the packed
//! precision parameter vector, hyperparameters and colored graphs.
//!
//! All vertex and pair indices are zero-based inside the library. File
//! formats written by [`crate::io`] shift them to one-based labels.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n × p` observation matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    centered: bool,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 || values.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be at least 2x2, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("data matrix contains non-finite values".into()));
        }
        Ok(Self {
            values,
            centered: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidInput(format!(
                "row {} has {} values, expected {p}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Returns a copy with every column shifted to mean zero.
    pub fn center_columns(&self) -> Result<Self> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidInput("centering requires n >= 2".into()));
        }
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
        }
        Ok(Self {
            values,
            centered: true,
        })
    }

    /// Permutes the columns: column `k` of the result is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: perm.len(),
            });
        }
        let values = DMatrix::from_fn(self.n(), self.p(), |i, k| self.values[(i, perm[k])]);
        Ok(Self {
            values,
            centered: self.centered,
        })
    }
}

/// The Gram matrix `XᵀX` and the sample count it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GramCache {
    s: DMatrix<f64>,
    n: usize,
}

impl GramCache {
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.s.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    /// Builds a cache from a precomputed symmetric matrix.
    pub fn from_matrix(s: DMatrix<f64>, n: usize) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::InvalidInput("Gram matrix must be square".into()));
        }
        let p = s.nrows();
        for i in 0..p {
            if s[(i, i)] < 0.0 {
                return Err(Error::InvalidInput(format!("Gram diagonal {i} is negative")));
            }
            for j in 0..i {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 * (1.0 + s[(i, j)].abs()) {
                    return Err(Error::InvalidInput("Gram matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self { s, n })
    }
}

/// Computes `XᵀX`, symmetrised so that `S[i,j]` and `S[j,i]` are bit-identical.
pub fn gram(data: &DataMatrix) -> GramCache {
    let x = data.values();
    let mut s = x.tr_mul(x);
    let p = s.nrows();
    for i in 0..p {
        for j in 0..i {
            let v = s[(i, j)];
            s[(j, i)] = v;
        }
    }
    GramCache { s, n: data.n() }
}

/// Number of off-diagonal slots for dimension `p`.
#[inline]
pub fn num_pairs(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Lexicographic index of the pair `(q, l)`, `q < l < p`.
pub fn pair_index(q: usize, l: usize, p: usize) -> Result<usize> {
    if q >= l || l >= p {
        return Err(Error::InvalidInput(format!(
            "pair ({q}, {l}) is not a valid ordered pair for p = {p}"
        )));
    }
    Ok(pair_index_unchecked(q, l, p))
}

#[inline]
pub(crate) fn pair_index_unchecked(q: usize, l: usize, p: usize) -> usize {
    q * (2 * p - q - 1) / 2 + (l - q - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(index: usize, p: usize) -> Result<(usize, usize)> {
    if index >= num_pairs(p) {
        return Err(Error::InvalidInput(format!(
            "pair index {index} out of range for p = {p}"
        )));
    }
    let mut start = 0;
    for q in 0..p - 1 {
        let row = p - q - 1;
        if index < start + row {
            return Ok((q, q + 1 + index - start));
        }
        start += row;
    }
    unreachable!("index bounded by num_pairs")
}

/// All pairs `(q, l)`, `q < l`, in lexicographic order.
pub fn all_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(num_pairs(p));
    for q in 0..p {
        for l in q + 1..p {
            out.push((q, l));
        }
    }
    out
}

/// Packed precision parameters: the `p` diagonal entries and the
/// `p(p−1)/2` off-diagonal entries in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionParams {
    diag: Vec<f64>,
    beta: Vec<f64>,
}

impl PrecisionParams {
    pub fn new(diag: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let p = diag.len();
        if p < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        if beta.len() != num_pairs(p) {
            return Err(Error::DimensionMismatch {
                expected: num_pairs(p),
                found: beta.len(),
            });
        }
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        if beta.iter().any(|b| !b.is_finite()) || diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(Self { diag, beta })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            diag: vec![1.0; p],
            beta: vec![0.0; num_pairs(p)],
        }
    }

    /// Reads the diagonal and upper triangle of a symmetric matrix.
    pub fn from_matrix(theta: &DMatrix<f64>) -> Result<Self> {
        if !theta.is_square() {
            return Err(Error::InvalidInput("precision matrix must be square".into()));
        }
        let p = theta.nrows();
        let diag = (0..p).map(|i| theta[(i, i)]).collect();
        let beta = all_pairs(p).into_iter().map(|(q, l)| theta[(q, l)]).collect();
        Self::new(diag, beta)
    }

    pub fn p(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub(crate) fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.diag
    }

    pub(crate) fn beta_mut(&mut self) -> &mut [f64] {
        &mut self.beta
    }

    /// Entry `θ_ij` of the implied symmetric matrix.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let p = self.p();
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.diag[i],
            std::cmp::Ordering::Less => self.beta[pair_index_unchecked(i, j, p)],
            std::cmp::Ordering::Greater => self.beta[pair_index_unchecked(j, i, p)],
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| self.entry(i, j))
    }

    /// Largest absolute coordinate difference against `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.diag
            .iter()
            .zip(&other.diag)
            .chain(self.beta.iter().zip(&other.beta))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Tuning weights, truncation threshold and solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub tau: f64,
    pub rho: f64,
    /// Initial quadratic multiplier weight for both constraint families.
    pub b_init: f64,
    pub eps_cd: f64,
    pub eps_alm: f64,
    pub eps_dc: f64,
    pub max_cd: usize,
    pub max_alm: usize,
    pub max_dc: usize,
    pub eps_zero: f64,
    pub eps_merge: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            tau: 0.1,
            rho: 2.0,
            b_init: 1.0,
            eps_cd: 1e-7,
            eps_alm: 1e-7,
            eps_dc: 1e-5,
            max_cd: 500,
            max_alm: 50,
            max_dc: 20,
            eps_zero: 1e-6,
            eps_merge: 1e-3,
        }
    }
}

impl Hyperparams {
    pub fn with_penalty(lambda1: f64, lambda2: f64, lambda3: f64, tau: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
            tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("hyperparameter {what}")));
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be a finite nonnegative number, got {v}"));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(&format!("tau must be positive, got {}", self.tau));
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return bad(&format!("rho must exceed 1, got {}", self.rho));
        }
        for (name, v) in [
            ("b_init", self.b_init),
            ("eps_cd", self.eps_cd),
            ("eps_alm", self.eps_alm),
            ("eps_dc", self.eps_dc),
            ("eps_zero", self.eps_zero),
            ("eps_merge", self.eps_merge),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_cd == 0 || self.max_alm == 0 || self.max_dc == 0 {
            return bad("iteration caps must be at least 1");
        }
        Ok(())
    }
}

/// Vertex and edge color partitions of an undirected graph.
///
/// Classes are stored sorted (members ascending, classes by smallest
/// member) so two graphs with the same coloring compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoredGraph {
    pub p: usize,
    pub vertex_classes: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub edge_classes: Vec<Vec<(usize, usize)>>,
}

impl ColoredGraph {
    pub fn new(
        p: usize,
        mut vertex_classes: Vec<Vec<usize>>,
        mut edge_classes: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        for class in &mut vertex_classes {
            class.sort_unstable();
        }
        vertex_classes.sort();
        for class in &mut edge_classes {
            for e in class.iter_mut() {
                if e.0 > e.1 {
                    *e = (e.1, e.0);
                }
            }
            class.sort_unstable();
        }
        edge_classes.sort();
        let mut edges: Vec<_> = edge_classes.iter().flatten().copied().collect();
        edges.sort_unstable();
        let graph = Self {
            p,
            vertex_classes,
            edges,
            edge_classes,
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.p];
        for class in &self.vertex_classes {
            if class.is_empty() {
                return Err(Error::InvalidInput("empty vertex class".into()));
            }
            for &v in class {
                if v >= self.p || std::mem::replace(&mut seen[v], true) {
                    return Err(Error::InvalidInput(format!(
                        "vertex {v} is out of range or appears in two classes"
                    )));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("vertex classes do not cover all vertices".into()));
        }
        let mut seen_edges = vec![false; num_pairs(self.p)];
        for class in &self.edge_classes {
            if class.is_empty() {
                return Err(Error::InvalidInput("empty edge class".into()));
            }
            for &(q, l) in class {
                let idx = pair_index(q, l, self.p)?;
                if std::mem::replace(&mut seen_edges[idx], true) {
                    return Err(Error::InvalidInput(format!(
                        "edge ({q}, {l}) appears in two classes"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of free parameters of the colored model.
    pub fn df(&self) -> usize {
        self.vertex_classes.len() + self.edge_classes.len()
    }

    /// Membership mask over the lexicographic off-diagonal slots.
    pub fn edge_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; num_pairs(self.p)];
        for &(q, l) in &self.edges {
            mask[pair_index_unchecked(q, l, self.p)] = true;
        }
        mask
    }
}

/// A fitted model after thresholding and color-class merging.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredGraphEstimate {
    pub params: PrecisionParams,
    pub graph: ColoredGraph,
    pub df: usize,
    /// Composite log-likelihood at the merged parameters.
    pub loglik: f64,
    pub bic: f64,
}
