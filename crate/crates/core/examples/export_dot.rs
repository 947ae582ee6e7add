//! Writes the true grid coloring as Graphviz DOT to stdout.
//!
//! Run with `cargo run --example export_dot > grid.dot` and render with
//! `neato -Tsvg grid.dot`.

use colored_ggm::io::to_dot;
use colored_ggm::simulate::grid_precision;

fn main() -> colored_ggm::Result<()> {
    let truth = grid_precision(4)?;
    print!("{}", to_dot(&truth.graph));
    Ok(())
}
