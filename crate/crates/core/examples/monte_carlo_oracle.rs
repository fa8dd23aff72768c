//! Simulated absorbing walks against the closed forms: expected visits,
//! time to absorption and its variance, and absorption destinations. The
//! estimates are identical for a seed whatever the thread count.
//!
//!     cargo run --release --example monte_carlo_oracle -- 200000 7

use gvc::ingest::{random_economy, SyntheticSpec};
use gvc::markov::{simulate, AbsorbingChain};
use gvc::networks::build_output_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_paths: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200_000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let economy = random_economy(&SyntheticSpec {
        countries: 2,
        sectors: 3,
        density: 0.6,
        seed: 5,
        ..SyntheticSpec::default()
    })?;
    let chain = AbsorbingChain::output_by_country(&build_output_network(&economy)?)?;
    let solver = chain.factor()?;
    let stats = solver.fundamental()?;
    let m = solver.solve(chain.absorb())?;

    let start = 0;
    let run = simulate(&chain, start, seed, n_paths)?;
    println!("{n_paths} paths from node {}, seed {seed}", economy.node_labels()[start]);
    println!("{:>22} {:>12} {:>12} {:>8}", "quantity", "closed form", "simulated", "z");
    let row = |name: String, exact: f64, est: gvc::markov::SimulationEstimate| {
        println!("{name:>22} {exact:12.6} {:12.6} {:8.2}", est.mean, est.z_score(exact));
    };
    for j in 0..chain.n() {
        row(format!("visits to node {}", j + 1), stats.l[(start, j)], run.mean_visits(j));
    }
    row("time to absorption".into(), stats.g[start], run.time_mean());
    row("variance of time".into(), stats.h[start], run.time_variance());
    for k in 0..chain.k() {
        row(format!("absorbed in country {}", k + 1), m[(start, k)], run.absorption_frequency(k));
    }
    Ok(())
}
