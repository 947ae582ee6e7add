//! Round-trips data through CSV, fits it and saves the estimate as JSON.
//!
//! Run with `cargo run --release --example csv_workflow`.

use colored_ggm::io::{read_csv, read_estimate, write_csv, write_json, EstimateFile};
use colored_ggm::model::gram;
use colored_ggm::optimizer::penalty_free_fit;
use colored_ggm::selection::colored_estimate;
use colored_ggm::simulate::{simulate, Family, SimSpec};
use colored_ggm::{fit_gram, Hyperparams};

fn main() -> colored_ggm::Result<()> {
    let dir = std::env::temp_dir().join("cggm-csv-workflow");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("data.csv");

    let (_, data) = simulate(&SimSpec { family: Family::Star, size: 8, n: 400, seed: 2 })?;
    write_csv(&csv, &data)?;
    let loaded = read_csv(&csv)?;
    assert_eq!(loaded.values(), data.values());

    let g = gram(&loaded.center_columns()?);
    let hyper = Hyperparams::with_penalty(0.01, 0.01, 0.003, 0.15);
    let report = fit_gram(&g, &hyper, Some(&penalty_free_fit(&g, &hyper)?))?;
    let estimate = colored_estimate(&report.params, &g, &hyper)?;

    let json = dir.join("estimate.json");
    write_json(&json, &EstimateFile::new(&estimate, &report, &hyper, g.n()))?;
    let back = read_estimate(&json)?.estimate()?;
    assert_eq!(back.params, estimate.params);
    println!("wrote {} and {} (df={})", csv.display(), json.display(), back.df);
    Ok(())
}
