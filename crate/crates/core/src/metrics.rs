//! Economy-level quantities: upstreamness, downstreamness, chain risk, the
//! four global indicators and the per-year panel.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GvcError, Result};
use crate::linalg::Matrix;
use crate::markov::{value_added_split, AbsorbingChain, ChainStatistics};
use crate::model::Economy;
use crate::networks::{
    block_means_by_country, build_input_network, build_output_network, BlockStats, InputNetwork,
    OutputNetwork,
};
use crate::spectral::{dominant_eigenpair, product_distribution, SpectralSummary, DEFAULT_MAX_ITER};

/// Expected number of stages to final use, `u = (I - B)⁻¹ 1`.
pub fn upstreamness(outp: &OutputNetwork) -> Result<Vec<f64>> {
    Ok(AbsorbingChain::output(outp)?.factor()?.fundamental()?.g)
}

/// Expected number of stages from primary inputs, `d = (I - Aᵀ)⁻¹ 1`.
pub fn downstreamness(inp: &InputNetwork) -> Result<Vec<f64>> {
    Ok(AbsorbingChain::input(inp)?.factor()?.fundamental()?.g)
}

/// Variance of the time to absorption of a chain.
pub fn chain_risk(chain: &AbsorbingChain) -> Result<Vec<f64>> {
    Ok(chain.factor()?.fundamental()?.h)
}

/// Domestic and cross-border mass of the value-added (`ζ`) and final-use
/// (`M`) distributions, summed over nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlobalIndicators {
    pub n: usize,
    pub gdva: f64,
    pub gieva: f64,
    pub gdfu: f64,
    pub giefu: f64,
    pub gdva_fraction: f64,
    pub gieva_fraction: f64,
    pub gdfu_fraction: f64,
    pub giefu_fraction: f64,
}

fn split_mass(dist: &Matrix, node_countries: &[usize]) -> (f64, f64) {
    let mut own = 0.0;
    let mut total = 0.0;
    for (i, &c) in node_countries.iter().enumerate() {
        let row = dist.row(i);
        own += row[c];
        total += row.iter().sum::<f64>();
    }
    (own, total - own)
}

/// `GDVA`/`GIEVA` from `ζ` and `GDFU`/`GIEFU` from `M`; both are `n x J`
/// with rows in node order.
pub fn global_indicators(m: &Matrix, zeta: &Matrix, node_countries: &[usize]) -> Result<GlobalIndicators> {
    let n = node_countries.len();
    if m.rows() != n || zeta.rows() != n || m.cols() != zeta.cols() {
        return Err(GvcError::Dimension(format!(
            "M is {}x{}, zeta is {}x{}, {n} nodes",
            m.rows(),
            m.cols(),
            zeta.rows(),
            zeta.cols()
        )));
    }
    if let Some(&c) = node_countries.iter().find(|&&c| c >= m.cols()) {
        return Err(GvcError::Labels(format!("country position {c} outside 0..{}", m.cols())));
    }
    let (gdva, gieva) = split_mass(zeta, node_countries);
    let (gdfu, giefu) = split_mass(m, node_countries);
    let nf = n.max(1) as f64;
    Ok(GlobalIndicators {
        n,
        gdva,
        gieva,
        gdfu,
        giefu,
        gdva_fraction: gdva / nf,
        gieva_fraction: gieva / nf,
        gdfu_fraction: gdfu / nf,
        giefu_fraction: giefu / nf,
    })
}

/// Mean of `values` per country; `None` for countries with no active node.
pub fn country_means(values: &[f64], node_countries: &[usize], n_countries: usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; n_countries];
    let mut count = vec![0usize; n_countries];
    for (&v, &c) in values.iter().zip(node_countries) {
        sum[c] += v;
        count[c] += 1;
    }
    sum.iter()
        .zip(&count)
        .map(|(&s, &k)| (k > 0).then(|| s / k as f64))
        .collect()
}

/// Equal-width histogram over `[min, max]` of the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Histogram {
            edges: vec![0.0; bins + 1],
            counts: vec![0; bins],
        };
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

/// Everything the analysis of one year produces.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub year: i32,
    pub input: InputNetwork,
    pub output: OutputNetwork,
    pub input_stats: ChainStatistics,
    pub output_stats: ChainStatistics,
    /// Final-use distribution `M = (I - B)⁻¹ D_η`.
    pub m: Matrix,
    /// Value-added distribution `ζ`.
    pub zeta: Matrix,
    pub spectral_a: SpectralSummary,
    pub spectral_b: SpectralSummary,
    /// Product distribution of `B`.
    pub product: Vec<f64>,
    /// Sup-norm gap between the product distributions of `A` and `B`.
    pub product_gap: f64,
    pub indicators: GlobalIndicators,
    pub blocks_a: BlockStats,
    pub blocks_b: BlockStats,
}

impl Analysis {
    pub fn upstreamness(&self) -> &[f64] {
        &self.output_stats.g
    }

    pub fn downstreamness(&self) -> &[f64] {
        &self.input_stats.g
    }
}

/// Runs both chains, the spectral summaries and the indicators for one
/// economy. Each chain is factored once and the factorization is reused
/// for `L` and for `M` or `ζ`.
pub fn analyze(economy: &Economy, tol_eig: f64) -> Result<Analysis> {
    let input = build_input_network(economy)?;
    let output = build_output_network(economy)?;
    let countries = economy.node_countries();
    let j = economy.labels().n_countries();

    let out_chain = AbsorbingChain::output_by_country(&output)?;
    let out_solver = out_chain.factor()?;
    let output_stats = out_solver.fundamental()?;
    let m = out_solver.solve(&output.d_eta)?;

    let in_chain = AbsorbingChain::input(&input)?;
    let in_solver = in_chain.factor()?;
    let input_stats = in_solver.fundamental()?;
    let zeta = in_solver.solve(&value_added_split(&input.delta, &countries, j))?;

    let spectral_a = dominant_eigenpair(&input.a, tol_eig, DEFAULT_MAX_ITER)?;
    let spectral_b = dominant_eigenpair(&output.b, tol_eig, DEFAULT_MAX_ITER)?;
    let product = product_distribution(&spectral_b);
    let product_a = product_distribution(&spectral_a);
    let product_gap = crate::linalg::sup_diff(&product, &product_a);

    let indicators = global_indicators(&m, &zeta, &countries)?;
    let blocks_a = block_means_by_country(&input.a, &countries)?;
    let blocks_b = block_means_by_country(&output.b, &countries)?;
    Ok(Analysis {
        year: economy.year(),
        input,
        output,
        input_stats,
        output_stats,
        m,
        zeta,
        spectral_a,
        spectral_b,
        product,
        product_gap,
        indicators,
        blocks_a,
        blocks_b,
    })
}

/// One year of the panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelRow {
    pub year: i32,
    pub n: usize,
    pub lambda: f64,
    pub blocks_a: BlockStats,
    pub blocks_b: BlockStats,
    pub indicators: GlobalIndicators,
}

/// Panel row of one economy: dominant eigenvalue, block means and
/// indicators, without the second-moment matrices.
pub fn panel_row(economy: &Economy, tol_eig: f64) -> Result<PanelRow> {
    let input = build_input_network(economy)?;
    let output = build_output_network(economy)?;
    let countries = economy.node_countries();
    let j = economy.labels().n_countries();
    let m = AbsorbingChain::output_by_country(&output)?
        .factor()?
        .solve(&output.d_eta)?;
    let zeta = AbsorbingChain::input(&input)?
        .factor()?
        .solve(&value_added_split(&input.delta, &countries, j))?;
    Ok(PanelRow {
        year: economy.year(),
        n: economy.n(),
        lambda: dominant_eigenpair(&output.b, tol_eig, DEFAULT_MAX_ITER)?.lambda,
        blocks_a: block_means_by_country(&input.a, &countries)?,
        blocks_b: block_means_by_country(&output.b, &countries)?,
        indicators: global_indicators(&m, &zeta, &countries)?,
    })
}

/// Panel rows ordered by year. Years are processed in parallel.
pub fn panel_report(economies: &[Economy], tol_eig: f64) -> Result<Vec<PanelRow>> {
    if economies.is_empty() {
        return Err(GvcError::EmptyInput);
    }
    let mut rows = economies
        .par_iter()
        .map(|e| panel_row(e, tol_eig))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.year);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{chain_example, random_economy, SyntheticSpec};
    use crate::model::Labels;

    fn autarky(j: usize, s: usize) -> Economy {
        let n = j * s;
        let z = Matrix::from_fn(n, n, |a, b| if a / s == b / s { 0.1 + 0.01 * (a + 2 * b) as f64 } else { 0.0 });
        let f = Matrix::from_fn(n, j, |a, c| if a / s == c { 1.0 + a as f64 } else { 0.0 });
        Economy::from_components(Labels::numbered(j, s).unwrap(), z, f).unwrap()
    }

    #[test]
    fn fig1_upstreamness() {
        let e = chain_example(0.3, 0.3).unwrap();
        let u = upstreamness(&build_output_network(&e).unwrap()).unwrap();
        for (a, b) in u.iter().zip([1.5854, 1.9512, 1.5854]) {
            assert!((a - b).abs() < 5e-5);
        }
    }

    #[test]
    fn no_intermediates() {
        let labels = Labels::numbered(2, 2).unwrap();
        let f = Matrix::from_fn(4, 2, |i, c| (i + c + 1) as f64);
        let e = Economy::from_components(labels, Matrix::zeros(4, 4), f).unwrap();
        assert_eq!(upstreamness(&build_output_network(&e).unwrap()).unwrap(), vec![1.0; 4]);
        assert_eq!(downstreamness(&build_input_network(&e).unwrap()).unwrap(), vec![1.0; 4]);
        let chain = AbsorbingChain::output(&build_output_network(&e).unwrap()).unwrap();
        assert_eq!(chain_risk(&chain).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn autarky_indicators() {
        let e = autarky(3, 2);
        let a = analyze(&e, 1e-12);
        // autarky is reducible, so the spectral step refuses it
        assert!(a.is_err());
        let row = panel_row(&e, 1e-12);
        assert!(row.is_err());
        let input = build_input_network(&e).unwrap();
        let output = build_output_network(&e).unwrap();
        let c = e.node_countries();
        let m = AbsorbingChain::output_by_country(&output)
            .unwrap()
            .factor()
            .unwrap()
            .solve(&output.d_eta)
            .unwrap();
        let zeta = AbsorbingChain::input(&input)
            .unwrap()
            .factor()
            .unwrap()
            .solve(&value_added_split(&input.delta, &c, 3))
            .unwrap();
        let g = global_indicators(&m, &zeta, &c).unwrap();
        assert!((g.gdva - 6.0).abs() < 1e-12 && g.gieva.abs() < 1e-12);
        assert!((g.gdfu - 6.0).abs() < 1e-12 && g.giefu.abs() < 1e-12);
        assert!((g.gdva_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complements_sum_to_n() {
        let e = random_economy(&SyntheticSpec {
            countries: 4,
            sectors: 3,
            density: 0.4,
            seed: 21,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let a = analyze(&e, 1e-12).unwrap();
        let g = a.indicators;
        assert!((g.gdva + g.gieva - 12.0).abs() < 1e-6);
        assert!((g.gdfu + g.giefu - 12.0).abs() < 1e-6);
        assert!(a.product_gap < 1e-9);
        let row = panel_row(&e, 1e-12).unwrap();
        assert_eq!(row.indicators, a.indicators);
        assert_eq!(row.lambda, a.spectral_b.lambda);
    }

    #[test]
    fn panel_is_sorted_and_deterministic() {
        let spec = SyntheticSpec {
            countries: 2,
            sectors: 2,
            seed: 4,
            ..SyntheticSpec::default()
        };
        let e = random_economy(&spec).unwrap();
        let rows = panel_report(&[e.clone().with_year(2003), e.clone().with_year(2001)], 1e-12).unwrap();
        assert_eq!(rows[0].year, 2001);
        assert_eq!(rows[0].indicators, rows[1].indicators);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0, 0.25], 4);
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
        assert_eq!(h.edges.len(), 5);
        assert_eq!(h.counts[3], 2);
        let flat = histogram(&[2.0, 2.0], 3);
        assert_eq!(flat.counts, vec![2, 0, 0]);
    }

    #[test]
    fn country_means_skip_empty() {
        let m = country_means(&[1.0, 3.0, 5.0], &[0, 0, 2], 3);
        assert_eq!(m, vec![Some(2.0), None, Some(5.0)]);
    }
}
