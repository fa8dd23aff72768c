//! Rank agreement of the kappa-parametrized upstreamness with its two
//! limits: the one-step measure 1 + B1 for small kappa and the right Perron
//! vector as kappa approaches 1/lambda.
//!
//!     cargo run --example kappa_sweep -- 0.6

use gvc::ingest::{random_economy, SyntheticSpec};
use gvc::networks::build_output_network;
use gvc::spectral::{dominant_eigenpair, output_limit_approximations, spearman, upstreamness_kappa, DEFAULT_MAX_ITER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let target: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.6);
    let economy = random_economy(&SyntheticSpec {
        countries: 4,
        sectors: 10,
        density: 0.5,
        spectral_target: Some(target),
        seed: 12,
        ..SyntheticSpec::default()
    })?;
    let outp = build_output_network(&economy)?;
    let eig = dominant_eigenpair(&outp.b, 1e-12, DEFAULT_MAX_ITER)?;
    let limits = output_limit_approximations(&outp, &eig)?;
    println!("n = {}, lambda = {:.6}, 1/lambda = {:.4}", economy.n(), eig.lambda, 1.0 / eig.lambda);
    println!("{:>10} {:>14} {:>14}", "kappa", "vs 1 + B1", "vs rho_r(B)");
    let top = 0.999 / eig.lambda;
    for k in 0..=12 {
        let kappa = 1e-3 * (top / 1e-3f64).powf(k as f64 / 12.0);
        let u = upstreamness_kappa(&outp, kappa, eig.lambda)?;
        println!(
            "{kappa:10.4} {:14.6} {:14.6}",
            spearman(&u, &limits.low_lambda)?,
            spearman(&u, &limits.high_lambda)?
        );
    }
    Ok(())
}
