//! Selects penalties on a full grid by BIC_c and scores the result.
//!
//! Run with `cargo run --release --example tune_bic`.

use colored_ggm::metrics::evaluate;
use colored_ggm::selection::{grid_search, TuneGrid};
use colored_ggm::simulate::{simulate, Family, SimSpec};
use colored_ggm::Hyperparams;

fn main() -> colored_ggm::Result<()> {
    let (truth, data) = simulate(&SimSpec { family: Family::Cycle, size: 10, n: 1000, seed: 3 })?;
    let base = Hyperparams::default();
    let grid = TuneGrid::coarse();
    let outcome = grid_search(&data, &grid, &base)?;

    let mut records: Vec<_> = outcome.records.iter().filter(|r| r.error.is_none()).collect();
    records.sort_by(|a, b| a.bic.total_cmp(&b.bic));
    println!("{} fits, five best:", outcome.records.len());
    for r in records.iter().take(5) {
        let h = &r.hyper;
        println!(
            "  l1={:<5} l2={:<6} l3={:<6} tau={:<5} df={:<3} bic={:.3}",
            h.lambda1, h.lambda2, h.lambda3, h.tau, r.df, r.bic
        );
    }

    let m = evaluate(&outcome.estimate.params, &truth.theta, &truth.graph, base.eps_zero, base.eps_merge)?;
    println!("selected: mse={:.4} f1={:.3} d0={:.3} acc_all={:.3}", m.mse, m.f1, m.d0, m.acc_all);
    Ok(())
}
