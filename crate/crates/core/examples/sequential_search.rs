//! Compares the one-parameter-at-a-time search with the full grid.
//!
//! Run with `cargo run --release --example sequential_search`.

use std::time::Instant;

use colored_ggm::selection::{grid_search, sequential_search, TuneGrid};
use colored_ggm::simulate::{simulate, Family, SimSpec};
use colored_ggm::Hyperparams;

fn main() -> colored_ggm::Result<()> {
    let (_, data) = simulate(&SimSpec { family: Family::Star, size: 10, n: 600, seed: 11 })?;
    let lists = (
        vec![0.01, 0.05],
        vec![0.005, 0.01, 0.02],
        vec![0.001, 0.003, 0.01],
        vec![0.1, 0.15, 0.2],
    );
    let full = TuneGrid::full(lists.0.clone(), lists.1.clone(), lists.2.clone(), lists.3.clone());
    let seq = TuneGrid::sequential(lists.0, lists.1, lists.2, lists.3);
    let base = Hyperparams::default();

    for (name, grid) in [("full", &full), ("sequential", &seq)] {
        let start = Instant::now();
        let outcome = if name == "full" {
            grid_search(&data, grid, &base)?
        } else {
            sequential_search(&data, grid, &base)?
        };
        let best = outcome.best_record();
        println!(
            "{name:<10} fits={:<3} best=({}, {}, {}, {}) df={} bic={:.3} in {:.2?}",
            outcome.records.len(),
            best.hyper.lambda1,
            best.hyper.lambda2,
            best.hyper.lambda3,
            best.hyper.tau,
            best.df,
            best.bic,
            start.elapsed()
        );
    }
    Ok(())
}
