//! Sparse, symmetry-constrained precision matrix estimation for colored
//! Gaussian graphical models.
//!
//! The estimator minimizes a negative composite (pseudo-) log-likelihood
//! plus truncated-L1 penalties on off-diagonal entries, on differences of
//! diagonal entries and on differences of off-diagonal entries. Zeros in
//! the fitted precision matrix give the graph; ties give its vertex and
//! edge color classes.
//!
//! Modules:
//! * [`model`]: data, Gram statistics, packed parameters, colored graphs
//! * [`likelihood`]: composite likelihood, penalties, surrogate, derivatives
//! * [`optimizer`]: DC / augmented Lagrangian / coordinate descent solver
//! * [`selection`]: BIC_c tuning and color-class extraction
//! * [`simulate`]: star, cycle and grid test models and Gaussian sampling
//! * [`metrics`]: MSE, F1, zero-pattern and color-class accuracies
//! * [`io`], [`commands`]: file formats and the batch commands behind `cggm`

pub mod commands;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod roots;
pub mod selection;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{
    ColoredGraph, ColoredGraphEstimate, DataMatrix, GramCache, Hyperparams, PrecisionParams,
};
pub use optimizer::{fit, fit_gram, FitReport};
