//! Input and output networks of a random economy share their dominant
//! eigenvalue and their product distribution; the Perron vectors map into
//! each other through the gross outputs.
//!
//!     cargo run --example product_distribution -- 4 5 0.5 17

use gvc::ingest::{random_economy, SyntheticSpec};
use gvc::networks::{build_input_network, build_output_network, verify_similarity};
use gvc::spectral::{compare_product_distributions, dominant_eigenpair, product_distribution, DEFAULT_MAX_ITER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, default: &str| args.get(k).cloned().unwrap_or_else(|| default.to_string());
    let spec = SyntheticSpec {
        countries: arg(0, "4").parse()?,
        sectors: arg(1, "5").parse()?,
        density: arg(2, "0.5").parse()?,
        seed: arg(3, "17").parse()?,
        ..SyntheticSpec::default()
    };
    let economy = random_economy(&spec)?;
    let inp = build_input_network(&economy)?;
    let outp = build_output_network(&economy)?;
    println!("n = {}, similarity residual {:.3e}", economy.n(), verify_similarity(&inp, &outp, economy.x()));

    let ea = dominant_eigenpair(&inp.a, 1e-13, DEFAULT_MAX_ITER)?;
    let eb = dominant_eigenpair(&outp.b, 1e-13, DEFAULT_MAX_ITER)?;
    let check = compare_product_distributions(&ea, &eb, economy.x());
    println!("lambda(A) = {:.12}  lambda(B) = {:.12}", check.lambda_a, check.lambda_b);
    println!("product distribution gap      {:.3e}", check.max_abs_difference);
    println!("right vector transform error  {:.3e}", check.right_transform_residual);
    println!("left vector transform error   {:.3e}", check.left_transform_residual);

    let labels = economy.node_labels();
    let mut ranked: Vec<(f64, &String)> = product_distribution(&eb).into_iter().zip(&labels).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    println!("largest product-distribution weights:");
    for (w, label) in ranked.iter().take(5) {
        println!("  {label:8} {w:.6}");
    }
    Ok(())
}
