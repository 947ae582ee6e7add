//! Checks the analytic composite-likelihood gradient against central
//! differences at a random point.
//!
//! Run with `cargo run --example gradient_check`.

use colored_ggm::likelihood::composite_loglik;
use colored_ggm::model::gram;
use colored_ggm::simulate::{simulate, Family, SimSpec};
use colored_ggm::PrecisionParams;

fn main() -> colored_ggm::Result<()> {
    let (truth, data) = simulate(&SimSpec { family: Family::Cycle, size: 6, n: 200, seed: 5 })?;
    let g = gram(&data.center_columns()?);
    let at = truth.params();
    let h = 1e-6;

    let mut worst: f64 = 0.0;
    for j in 0..at.p() {
        let f = |t: f64| {
            let mut diag = at.diag().to_vec();
            diag[j] = t;
            composite_loglik(&PrecisionParams::new(diag, at.beta().to_vec())?, &g)
        };
        let t = at.diag()[j];
        let numeric = (f(t + h)? - f(t - h)?) / (2.0 * h);
        let analytic = diag_gradient(&at, &g, j);
        worst = worst.max((numeric - analytic).abs());
        println!("d l_c / d theta_{j}{j}: analytic={analytic:.6} numeric={numeric:.6}");
    }
    println!("worst gap {worst:.2e}");
    Ok(())
}

/// Derivative of l_c in theta_jj: n/(2 theta_jj) minus the derivative of
/// the residual sum of squares of regression j.
fn diag_gradient(params: &PrecisionParams, g: &colored_ggm::GramCache, j: usize) -> f64 {
    let p = params.p();
    let n = g.n() as f64;
    let t = params.diag()[j];
    // r_j = X_j + sum_k (theta_jk / theta_jj) X_k
    let mut quad = 0.0; // sum_{k,l != j} theta_jk theta_jl S_kl
    for k in (0..p).filter(|&k| k != j) {
        for l in (0..p).filter(|&l| l != j) {
            quad += params.entry(j, k) * params.entry(j, l) * g.get(k, l);
        }
    }
    n / (2.0 * t) - 0.5 * g.get(j, j) + 0.5 * quad / (t * t)
}
