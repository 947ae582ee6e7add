//! File formats: data CSV, truth and estimate JSON, search traces,
//! replicate tables and DOT export.
//!
//! Vertex labels in every file are 1-based; the library is 0-based.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ColoredGraph, ColoredGraphEstimate, DataMatrix, Hyperparams, PrecisionParams};
use crate::optimizer::FitReport;
use crate::selection::TuneRecord;
use crate::simulate::{Family, TrueModel};

pub const SCHEMA_VERSION: u32 = 1;

/// Parses comma-separated numeric data. A first row containing any
/// non-numeric field is taken as a header. Rows in diagnostics are file
/// lines (1-based), columns are 1-based.
pub fn read_csv_from<R: Read>(reader: R) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            row: e.position().map_or(i + 1, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Csv {
                row: line,
                column: record.len().min(expected) + 1,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (j, field) in record.iter().enumerate() {
            let value = field.parse::<f64>().ok().filter(|v| v.is_finite());
            row.push(value.ok_or_else(|| Error::Csv {
                row: line,
                column: j + 1,
                message: format!("not a finite number: {field:?}"),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("data file has no numeric rows".into()));
    }
    DataMatrix::from_rows(&rows)
}

pub fn read_csv(path: &Path) -> Result<DataMatrix> {
    read_csv_from(fs::File::open(path)?)
}

/// Writes data with header `x1..xp`; values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_csv_to<W: Write>(writer: W, data: &DataMatrix) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record((1..=data.p()).map(|j| format!("x{j}"))).map_err(csv_err)?;
    let values = data.values();
    for i in 0..data.n() {
        wtr.write_record((0..data.p()).map(|j| values[(i, j)].to_string())).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, data: &DataMatrix) -> Result<()> {
    let mut buf = Vec::new();
    write_csv_to(&mut buf, data)?;
    fs::write(path, buf)?;
    Ok(())
}

fn dense_rows(theta: &DMatrix<f64>) -> Vec<Vec<f64>> {
    theta.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn dense_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// Color classes with 1-based labels, as stored in files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub p: usize,
    pub vertex_classes: Vec<Vec<usize>>,
    pub edges: Vec<[usize; 2]>,
    pub edge_classes: Vec<Vec<[usize; 2]>>,
}

impl GraphFile {
    pub fn from_graph(graph: &ColoredGraph) -> Self {
        let edge = |&(q, l): &(usize, usize)| [q + 1, l + 1];
        Self {
            p: graph.p,
            vertex_classes: graph
                .vertex_classes
                .iter()
                .map(|c| c.iter().map(|v| v + 1).collect())
                .collect(),
            edges: graph.edges.iter().map(edge).collect(),
            edge_classes: graph.edge_classes.iter().map(|c| c.iter().map(edge).collect()).collect(),
        }
    }

    pub fn to_graph(&self) -> Result<ColoredGraph> {
        let label = |v: usize| {
            v.checked_sub(1)
                .ok_or_else(|| Error::InvalidInput("vertex labels are 1-based".into()))
        };
        let vertex_classes = self
            .vertex_classes
            .iter()
            .map(|c| c.iter().map(|&v| label(v)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let edge_classes = self
            .edge_classes
            .iter()
            .map(|c| c.iter().map(|&[q, l]| Ok((label(q)?, label(l)?))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        ColoredGraph::new(self.p, vertex_classes, edge_classes)
    }
}

/// Ground truth written next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: u32,
    pub family: Family,
    pub size: usize,
    pub n: usize,
    pub seed: u64,
    /// Vertex numbering; grids are numbered row by row.
    pub numbering: String,
    /// Dense precision matrix, row-major.
    pub theta: Vec<Vec<f64>>,
    #[serde(flatten)]
    pub graph: GraphFile,
}

impl TruthFile {
    pub fn new(model: &TrueModel, n: usize, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            family: model.family,
            size: model.size,
            n,
            seed,
            numbering: match model.family {
                Family::Grid => "row-major".into(),
                Family::Star => "leaves then hub".into(),
                Family::Cycle => "cyclic".into(),
            },
            theta: dense_rows(&model.theta),
            graph: GraphFile::from_graph(&model.graph),
        }
    }

    pub fn to_model(&self) -> Result<TrueModel> {
        let theta = dense_matrix(&self.theta)?;
        let graph = self.graph.to_graph()?;
        if graph.p != theta.nrows() {
            return Err(Error::DimensionMismatch {
                expected: theta.nrows(),
                found: graph.p,
            });
        }
        Ok(TrueModel {
            family: self.family,
            size: self.size,
            theta,
            graph,
        })
    }
}

/// A fitted colored model as written by `fit` and `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub schema_version: u32,
    pub n: usize,
    pub hyperparams: Hyperparams,
    /// Merged precision matrix, row-major.
    pub theta: Vec<Vec<f64>>,
    pub diag: Vec<f64>,
    /// Off-diagonals in lexicographic order of `(i, j)`, `i < j`.
    pub beta: Vec<f64>,
    #[serde(flatten)]
    pub graph: GraphFile,
    pub df: usize,
    pub loglik: f64,
    pub bic: f64,
    pub converged: bool,
    pub alm_converged: bool,
    pub dc_converged: bool,
    pub dc_iterations: usize,
    pub alm_iterations: usize,
    pub cd_sweeps: usize,
    pub final_residual: f64,
    pub objective_trace: Vec<f64>,
}

impl EstimateFile {
    pub fn new(estimate: &ColoredGraphEstimate, report: &FitReport, hyper: &Hyperparams, n: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n,
            hyperparams: *hyper,
            theta: dense_rows(&estimate.params.to_matrix()),
            diag: estimate.params.diag().to_vec(),
            beta: estimate.params.beta().to_vec(),
            graph: GraphFile::from_graph(&estimate.graph),
            df: estimate.df,
            loglik: estimate.loglik,
            bic: estimate.bic,
            converged: report.converged(),
            alm_converged: report.alm_converged,
            dc_converged: report.dc_converged,
            dc_iterations: report.dc_iterations,
            alm_iterations: report.alm_iterations,
            cd_sweeps: report.cd_sweeps,
            final_residual: report.final_residual,
            objective_trace: report.objective_trace.clone(),
        }
    }

    pub fn params(&self) -> Result<PrecisionParams> {
        PrecisionParams::new(self.diag.clone(), self.beta.clone())
    }

    pub fn estimate(&self) -> Result<ColoredGraphEstimate> {
        Ok(ColoredGraphEstimate {
            params: self.params()?,
            graph: self.graph.to_graph()?,
            df: self.df,
            loglik: self.loglik,
            bic: self.bic,
        })
    }
}

fn check_schema(path: &Path, version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::MalformedFile {
            path: path.to_path_buf(),
            message: format!("unsupported schema_version {version}"),
        });
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<TruthFile> {
    let truth: TruthFile = read_json(path)?;
    check_schema(path, truth.schema_version)?;
    Ok(truth)
}

pub fn read_estimate(path: &Path) -> Result<EstimateFile> {
    let est: EstimateFile = read_json(path)?;
    check_schema(path, est.schema_version)?;
    Ok(est)
}

/// Reads the coloring from either an estimate or a truth file.
pub fn read_graph(path: &Path) -> Result<ColoredGraph> {
    let graph: GraphFile = read_json(path)?;
    graph.to_graph().map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wtr.write_record(row).map_err(csv_err)?;
    }
    wtr.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// One row per evaluated tuple; the selected row has `selected = true`.
pub fn trace_csv(records: &[TuneRecord], best: usize) -> Result<Vec<u8>> {
    csv_bytes(
        &["lambda1", "lambda2", "lambda3", "tau", "loglik", "df", "bic", "converged", "selected"],
        records.iter().enumerate().map(|(i, r)| {
            vec![
                r.hyper.lambda1.to_string(),
                r.hyper.lambda2.to_string(),
                r.hyper.lambda3.to_string(),
                r.hyper.tau.to_string(),
                r.loglik.to_string(),
                r.df.to_string(),
                r.bic.to_string(),
                r.converged.to_string(),
                (i == best).to_string(),
            ]
        }),
    )
}

/// Outcome of one Monte Carlo replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub tau: f64,
    pub df: usize,
    pub converged: bool,
    pub mse: f64,
    pub f1: f64,
    pub d0: f64,
    pub acc_all: f64,
    /// Set when the replicate failed; metric fields are then NaN.
    pub error: Option<String>,
}

pub fn replicates_csv(rows: &[ReplicateRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "replicate", "seed", "lambda1", "lambda2", "lambda3", "tau", "df", "converged", "mse", "f1", "d0",
            "acc_all", "error",
        ],
        rows.iter().map(|r| {
            vec![
                r.replicate.to_string(),
                r.seed.to_string(),
                r.lambda1.to_string(),
                r.lambda2.to_string(),
                r.lambda3.to_string(),
                r.tau.to_string(),
                r.df.to_string(),
                r.converged.to_string(),
                r.mse.to_string(),
                r.f1.to_string(),
                r.d0.to_string(),
                r.acc_all.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

/// Sample mean and standard deviation; the deviation is 0 for one value.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// `mean(sd)` with four decimals.
pub fn format_mean_sd(values: &[f64]) -> String {
    let (m, s) = mean_sd(values);
    format!("{m:.4}({s:.4})")
}

/// Aggregated replicate results in the `mean(sd)` table layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub failed: usize,
    pub mse: (f64, f64),
    pub f1: (f64, f64),
    pub d0: (f64, f64),
    pub acc_all: (f64, f64),
}

impl Summary {
    pub fn from_rows(family: Family, p: usize, n: usize, rows: &[ReplicateRow]) -> Self {
        let ok: Vec<&ReplicateRow> = rows.iter().filter(|r| r.error.is_none()).collect();
        let col = |f: fn(&ReplicateRow) -> f64| mean_sd(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            family,
            p,
            n,
            reps: rows.len(),
            failed: rows.len() - ok.len(),
            mse: col(|r| r.mse),
            f1: col(|r| r.f1),
            d0: col(|r| r.d0),
            acc_all: col(|r| r.acc_all),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let cell = |(m, s): (f64, f64)| format!("{m:.4}({s:.4})");
        csv_bytes(
            &["family", "p", "n", "reps", "failed", "mse", "f1", "d0", "acc_all"],
            [vec![
                self.family.to_string(),
                self.p.to_string(),
                self.n.to_string(),
                self.reps.to_string(),
                self.failed.to_string(),
                cell(self.mse),
                cell(self.f1),
                cell(self.d0),
                cell(self.acc_all),
            ]],
        )
    }
}

/// Color for classes with a single member.
pub const SINGLETON_COLOR: &str = "#E49B0F";

pub const PALETTE: [&str; 12] = [
    "#1F77B4", "#D62728", "#2CA02C", "#9467BD", "#8C564B", "#17BECF", "#E377C2", "#7F7F7F", "#BCBD22",
    "#393B79", "#AD494A", "#637939",
];

/// Undirected DOT rendering. Vertex classes are colored first, then edge
/// classes, each multi-member class taking the next palette color.
pub fn to_dot(graph: &ColoredGraph) -> String {
    let mut next = 0usize;
    let mut color = |len: usize| {
        if len == 1 {
            SINGLETON_COLOR
        } else {
            let c = PALETTE[next % PALETTE.len()];
            next += 1;
            c
        }
    };
    let mut vertex_color = vec![SINGLETON_COLOR; graph.p];
    for class in &graph.vertex_classes {
        let c = color(class.len());
        for &v in class {
            vertex_color[v] = c;
        }
    }
    let mut out = String::from("graph colored_ggm {\n  node [shape=circle, style=filled];\n");
    for (v, c) in vertex_color.iter().enumerate() {
        writeln!(out, "  {} [fillcolor=\"{c}\"];", v + 1).expect("writing to a String");
    }
    for class in &graph.edge_classes {
        let c = color(class.len());
        for &(q, l) in class {
            writeln!(out, "  {} -- {} [color=\"{c}\", penwidth=2];", q + 1, l + 1).expect("writing to a String");
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{grid_precision, star_precision};

    #[test]
    fn header_detection() {
        let with = read_csv_from("x1,x2\n1,2\n3,4\n".as_bytes()).unwrap();
        let without = read_csv_from("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(with, without);
        assert_eq!(with.n(), 2);
        assert_eq!(with.p(), 2);
    }

    #[test]
    fn diagnostics_name_row_and_column() {
        let err = read_csv_from("x1,x2\n1,2\n3,abc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 3, column 2"), "{err}");
        let err = read_csv_from("1,2\n3,abc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2, column 2"), "{err}");
        let err = read_csv_from("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2, column 2"), "{err}");
        let err = read_csv_from("1,2\n3,4,5\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2, column 3"), "{err}");
        assert!(read_csv_from("x1,x2\n".as_bytes()).is_err());
        assert!(read_csv_from("1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, std::f64::consts::PI]];
        let data = DataMatrix::from_rows(&rows).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &data).unwrap();
        assert!(buf.starts_with(b"x1,x2\n"));
        assert_eq!(read_csv_from(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn graph_file_round_trip() {
        let truth = grid_precision(4).unwrap();
        let file = GraphFile::from_graph(&truth.graph);
        assert_eq!(file.edges.len(), 24);
        assert!(file.vertex_classes.iter().flatten().all(|&v| (1..=16).contains(&v)));
        assert_eq!(file.to_graph().unwrap(), truth.graph);
    }

    #[test]
    fn truth_file_round_trip() {
        let truth = star_precision(5).unwrap();
        let file = TruthFile::new(&truth, 100, 7);
        let text = serde_json::to_string(&file).unwrap();
        let back: TruthFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_model().unwrap(), truth);
    }

    #[test]
    fn mean_sd_conventions() {
        assert_eq!(mean_sd(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(format_mean_sd(&[0.0206, 0.0206]), "0.0206(0.0000)");
    }

    #[test]
    fn dot_for_star_truth() {
        let truth = star_precision(10).unwrap();
        let dot = to_dot(&truth.graph);
        let spokes: Vec<&str> = dot.lines().filter(|l| l.contains("--")).collect();
        assert_eq!(spokes.len(), 9);
        let colors: std::collections::BTreeSet<&str> =
            spokes.iter().map(|l| l.split("color=\"").nth(1).unwrap()).collect();
        assert_eq!(colors.len(), 1);
        assert!(dot.contains(&format!("10 [fillcolor=\"{SINGLETON_COLOR}\"]")));
        assert_eq!(dot, to_dot(&truth.graph));
    }

    #[test]
    fn dot_for_empty_graph() {
        let graph = ColoredGraph::new(3, vec![vec![0], vec![1], vec![2]], vec![]).unwrap();
        let dot = to_dot(&graph);
        assert_eq!(dot.lines().filter(|l| l.contains("fillcolor")).count(), 3);
        assert!(!dot.contains("--"));
    }
}
