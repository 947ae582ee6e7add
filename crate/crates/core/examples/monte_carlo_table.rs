//! Small Monte Carlo study: replicate, tune, evaluate and print a
//! mean(sd) summary row, as `cggm replicate` does.
//!
//! Run with `cargo run --release --example monte_carlo_table`.

use colored_ggm::commands::replicate_rows;
use colored_ggm::io::Summary;
use colored_ggm::selection::TuneGrid;
use colored_ggm::simulate::{Family, SimSpec};
use colored_ggm::Hyperparams;

fn main() -> colored_ggm::Result<()> {
    let spec = SimSpec { family: Family::Star, size: 10, n: 500, seed: 100 };
    let rows = replicate_rows(&spec, &TuneGrid::coarse(), &Hyperparams::default(), 5, 1)?;
    for row in &rows {
        println!("seed {:<4} mse={:.4} f1={:.3} acc_all={:.3}", row.seed, row.mse, row.f1, row.acc_all);
    }
    let summary = Summary::from_rows(spec.family, 10, spec.n, &rows);
    print!("{}", String::from_utf8_lossy(&summary.to_csv()?));
    Ok(())
}
