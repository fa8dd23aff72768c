//! The three-country line economy: moments of the output chain, the
//! dominant eigenvalue, the product distribution and how the conditioned
//! state distribution behaves as the horizon grows.
//!
//!     cargo run --example three_country_chain -- 0.2 0.3

use gvc::ingest::chain_example;
use gvc::markov::{conditional_state_distribution, doubly_conditional_distribution, time_fractions, AbsorbingChain};
use gvc::networks::build_output_network;
use gvc::spectral::{dominant_eigenpair, product_distribution, DEFAULT_MAX_ITER, DEFAULT_TOL_EIG};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let p: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.3);
    let q: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.3);

    let economy = chain_example(p, q)?;
    let outp = build_output_network(&economy)?;
    let chain = AbsorbingChain::output(&outp)?;
    let stats = chain.factor()?.fundamental()?;

    println!("p = {p}, q = {q}");
    println!("upstreamness u = L1      {:.6?}", stats.g);
    println!("variance of stages h     {:.6?}", stats.h);

    let eig = dominant_eigenpair(&outp.b, DEFAULT_TOL_EIG, DEFAULT_MAX_ITER)?;
    println!("lambda = {:.12} (sqrt(2pq) = {:.12})", eig.lambda, (2.0 * p * q).sqrt());
    println!("product distribution     {:.6?}", product_distribution(&eig));

    // B is bipartite (nodes 1 and 3 against node 2), so the conditioned
    // law flips with the parity of t while its time average settles.
    let uniform = [1.0 / 3.0; 3];
    for t in [50, 51, 200, 201] {
        println!(
            "t = {t:3}: conditional {:.6?}  doubly conditional at t/2 {:.6?}",
            conditional_state_distribution(&chain, &uniform, t)?,
            doubly_conditional_distribution(&chain, &uniform, t / 2, t)?,
        );
    }
    let avg = time_fractions(&chain, &uniform, 400)?;
    println!("time fractions at t = 400, surviving paths {:.6?}", avg.surviving_t);
    Ok(())
}
