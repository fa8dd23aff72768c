//! Command-line front end: `validate`, `analyze`, `verify` and `report`.
//!
//! Settings come from flags, then an optional `key = value` config file,
//! then built-in defaults. Exit codes: 0 success, 1 a domain or check
//! failure, 2 an I/O or usage problem.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use crate::error::{GvcError, Result};
use crate::ingest::{random_economy, read_path, ColumnMap, Format, Ingested, SyntheticSpec};
use crate::linalg::Matrix;
use crate::markov::industry_matrix;
use crate::metrics::{analyze, country_means, histogram, panel_report, Analysis, PanelRow};
use crate::model::{validate, Economy, ValidationReport, TAU_ACCT_INGESTED, TAU_ACCT_SYNTHETIC};
use crate::networks::{write_matrix_binary, write_matrix_csv};
use crate::report::{fmt_sig, write_csv_rows, write_json};
use crate::spectral::{
    downstreamness_kappa, input_limit_approximations, output_limit_approximations, spearman,
    upstreamness_kappa, DEFAULT_TOL_EIG,
};
use crate::verify::{verify_economy, VerifyOptions, VerifyReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "gvc", version, about = "Absorbing Markov chain analysis of world input-output tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the accounting identities of each input table
    Validate(CommonArgs),
    /// Compute chain statistics, spectra, distributions and indicators
    Analyze(CommonArgs),
    /// Run the numerical checks of the structural results
    Verify(CommonArgs),
    /// Assemble the multi-year panel
    Report(CommonArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// Input tables, one per year
    inputs: Vec<PathBuf>,
    /// Input format: canonical or wiod
    #[arg(long)]
    format: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config file with key = value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Column-name map for long-format WIOD files
    #[arg(long)]
    columns: Option<PathBuf>,
    /// Relative accounting tolerance
    #[arg(long = "tau-acct")]
    tau_acct: Option<f64>,
    /// Eigen-residual tolerance
    #[arg(long = "tol-eig")]
    tol_eig: Option<f64>,
    /// Simulation seed
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo paths per start state
    #[arg(long)]
    paths: Option<u64>,
    /// Kappa sweep as a:b:steps
    #[arg(long = "kappa-grid")]
    kappa_grid: Option<String>,
    /// Sectors (ordinals or codes) for the per-industry matrices
    #[arg(long, value_delimiter = ',')]
    sectors: Option<Vec<String>>,
    /// Years processed in parallel
    #[arg(long)]
    jobs: Option<usize>,
    /// Generate the economy instead of reading files, e.g. J=3 S=4 seed=7
    #[arg(long, num_args = 1..)]
    synthetic: Option<Vec<String>>,
    /// Histogram bins
    #[arg(long)]
    bins: Option<usize>,
}

/// Linear grid of `steps` kappa values from `a` to `b` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaGrid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl KappaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.end - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.start + h * k as f64).collect()
    }
}

impl FromStr for KappaGrid {
    type Err = GvcError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || GvcError::Parameter(format!("kappa grid '{s}' is not a:b:steps"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(start > 0.0) || end < start || steps == 0 || !end.is_finite() {
            return Err(GvcError::Parameter(format!(
                "kappa grid needs 0 < a <= b and steps >= 1 (got '{s}')"
            )));
        }
        Ok(Self { start, end, steps })
    }
}

/// Resolved settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    #[serde(skip)]
    pub format: Format,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub columns: ColumnMap,
    pub tau_acct: f64,
    pub tol_eig: f64,
    pub seed: u64,
    pub n_paths: u64,
    pub kappa_grid: KappaGrid,
    pub sectors: Vec<String>,
    pub jobs: usize,
    pub synthetic: Option<SyntheticSpec>,
    pub bins: usize,
}

pub const DEFAULT_KAPPA_GRID: &str = "0.05:1:20";
pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_PATHS: u64 = 100_000;

fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| GvcError::Parse {
            line: k + 1,
            message: format!("expected key = value in {}", path.display()),
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| GvcError::Parameter(format!("bad value '{value}' for {key}")))
}

impl RunConfig {
    fn resolve(args: CommonArgs) -> Result<Self> {
        let mut file = CommonArgs::default();
        if let Some(path) = &args.config {
            for (key, value) in read_config_file(path)? {
                match key.as_str() {
                    "format" => file.format = Some(value),
                    "out" => file.out = Some(value.into()),
                    "columns" => file.columns = Some(value.into()),
                    "tau_acct" => file.tau_acct = Some(parse_value(&key, &value)?),
                    "tol_eig" => file.tol_eig = Some(parse_value(&key, &value)?),
                    "seed" => file.seed = Some(parse_value(&key, &value)?),
                    "paths" => file.paths = Some(parse_value(&key, &value)?),
                    "kappa_grid" => file.kappa_grid = Some(value),
                    "sectors" => file.sectors = Some(value.split(',').map(|s| s.trim().to_string()).collect()),
                    "jobs" => file.jobs = Some(parse_value(&key, &value)?),
                    "bins" => file.bins = Some(parse_value(&key, &value)?),
                    "synthetic" => file.synthetic = Some(value.split_whitespace().map(String::from).collect()),
                    "inputs" => file.inputs = value.split_whitespace().map(PathBuf::from).collect(),
                    other => return Err(GvcError::Parameter(format!("unknown config key '{other}'"))),
                }
            }
        }
        let format: Format = args
            .format
            .or(file.format)
            .as_deref()
            .unwrap_or("canonical")
            .parse()
            .map_err(GvcError::Parameter)?;
        let columns = match args.columns.or(file.columns) {
            Some(p) => ColumnMap::from_reader(fs::File::open(p)?)?,
            None => ColumnMap::default(),
        };
        let synthetic = match args.synthetic.or(file.synthetic) {
            Some(items) => Some(SyntheticSpec::from_pairs(&items)?),
            None => None,
        };
        let default_tau = if synthetic.is_some() {
            TAU_ACCT_SYNTHETIC
        } else {
            TAU_ACCT_INGESTED
        };
        let tau_acct = args.tau_acct.or(file.tau_acct).unwrap_or(default_tau);
        let tol_eig = args.tol_eig.or(file.tol_eig).unwrap_or(DEFAULT_TOL_EIG);
        if !(tau_acct > 0.0) || !(tol_eig > 0.0) {
            return Err(GvcError::Parameter("tolerances must be positive".into()));
        }
        let kappa_grid = args
            .kappa_grid
            .or(file.kappa_grid)
            .as_deref()
            .unwrap_or(DEFAULT_KAPPA_GRID)
            .parse()?;
        let inputs = if args.inputs.is_empty() { file.inputs } else { args.inputs };
        if inputs.is_empty() && synthetic.is_none() {
            return Err(GvcError::Parameter("no input files and no --synthetic spec".into()));
        }
        Ok(Self {
            inputs,
            format,
            out: args.out.or(file.out),
            columns,
            tau_acct,
            tol_eig,
            seed: args.seed.or(file.seed).unwrap_or(1),
            n_paths: args.paths.or(file.paths).unwrap_or(DEFAULT_PATHS),
            kappa_grid,
            sectors: args.sectors.or(file.sectors).unwrap_or_default(),
            jobs: args.jobs.or(file.jobs).unwrap_or(1).max(1),
            synthetic,
            bins: args.bins.or(file.bins).unwrap_or(DEFAULT_BINS).max(1),
        })
    }

    fn out_dir(&self) -> Result<Option<PathBuf>> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
        }
        Ok(self.out.clone())
    }
}

/// Loads every year of the run: the synthetic economy, or each input file.
pub fn load_inputs(config: &RunConfig) -> Result<Vec<Ingested>> {
    if let Some(spec) = &config.synthetic {
        let economy = random_economy(spec)?;
        let report = validate(&economy, config.tau_acct);
        return Ok(vec![Ingested { economy, report }]);
    }
    config
        .inputs
        .iter()
        .map(|p| {
            info!("reading {}", p.display());
            read_path(p, config.format, &config.columns, config.tau_acct).map_err(|e| match e {
                GvcError::Io(io) => GvcError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", p.display()))),
                GvcError::Parse { line, message } => GvcError::Parse {
                    line,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })
        })
        .collect()
}

/// Exit code for an error that ends a run.
pub fn exit_code(e: &GvcError) -> u8 {
    match e {
        GvcError::Io(_) | GvcError::Parse { .. } | GvcError::EmptyInput | GvcError::Json(_) => EXIT_USAGE,
        GvcError::Parameter(_) | GvcError::Labels(_) | GvcError::Dimension(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn year_dir(out: &Path, year: i32) -> Result<PathBuf> {
    let dir = out.join(year.to_string());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| GvcError::Parameter(e.to_string()))?;
    Ok(pool.install(f))
}

/// `validate`: exit 0 iff every year passes.
pub fn cmd_validate(config: &RunConfig) -> Result<u8> {
    let years = load_inputs(config)?;
    let out = config.out_dir()?;
    let mut all_pass = true;
    for y in &years {
        let r: &ValidationReport = &y.report;
        println!(
            "{} year {}: n={} max output residual {} max value-added residual {} clamped {} removed {}",
            if r.passes { "PASS" } else { "FAIL" },
            y.economy.year(),
            y.economy.n(),
            fmt_sig(r.max_output_rel),
            fmt_sig(r.max_value_added_rel),
            r.clamped_cells,
            r.removed_nodes.len()
        );
        for flat in &r.flagged {
            println!("  flagged node {} ({})", flat, y.economy.labels().node_label(*flat));
        }
        all_pass &= r.passes;
        if let Some(dir) = &out {
            write_json(&year_dir(dir, y.economy.year())?.join("validation.json"), r)?;
        }
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_FAILURE })
}

fn resolve_sector(economy: &Economy, code: &str) -> Result<usize> {
    let labels = economy.labels();
    if let Ok(k) = code.parse::<usize>() {
        if (1..=labels.n_sectors()).contains(&k) {
            return Ok(k);
        }
    }
    labels
        .sector_position(code)
        .map(|p| p + 1)
        .ok_or_else(|| GvcError::Parameter(format!("unknown sector '{code}'")))
}

#[derive(Serialize)]
struct SpectralFile<'a> {
    year: i32,
    lambda: f64,
    product_distribution: &'a [f64],
    product_gap: f64,
    input_network: &'a crate::spectral::SpectralSummary,
    output_network: &'a crate::spectral::SpectralSummary,
}

#[derive(Serialize)]
struct CountryMean {
    country: String,
    upstreamness: Option<f64>,
    downstreamness: Option<f64>,
}

#[derive(Serialize)]
struct IndicatorFile<'a> {
    year: i32,
    indicators: &'a crate::metrics::GlobalIndicators,
    blocks_a: &'a crate::networks::BlockStats,
    blocks_b: &'a crate::networks::BlockStats,
    country_means: Vec<CountryMean>,
}

/// One row of the kappa sweep; `None` where the correlation is undefined.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub u_vs_low: Option<f64>,
    pub u_vs_high: Option<f64>,
    pub d_vs_low: Option<f64>,
    pub d_vs_high: Option<f64>,
}

/// Spearman correlations of `u(κ)` and `d(κ)` with both limit vectors over
/// the grid. Values with `κλ ≥ 1` are skipped with a warning.
pub fn kappa_sweep(analysis: &Analysis, grid: &KappaGrid) -> Result<Vec<SweepRow>> {
    let lam_b = analysis.spectral_b.lambda;
    let lam_a = analysis.spectral_a.lambda;
    let out_lim = output_limit_approximations(&analysis.output, &analysis.spectral_b)?;
    let in_lim = input_limit_approximations(&analysis.input, &analysis.spectral_a)?;
    let mut rows = Vec::new();
    for kappa in grid.values() {
        if kappa * lam_b.max(lam_a) >= 1.0 {
            warn!(
                "year {}: kappa {} skipped, not below 1/lambda = {}",
                analysis.year,
                fmt_sig(kappa),
                fmt_sig(1.0 / lam_b)
            );
            continue;
        }
        let u = upstreamness_kappa(&analysis.output, kappa, lam_b)?;
        let d = downstreamness_kappa(&analysis.input, kappa, lam_a)?;
        rows.push(SweepRow {
            kappa,
            u_vs_low: spearman(&u, &out_lim.low_lambda).ok(),
            u_vs_high: spearman(&u, &out_lim.high_lambda).ok(),
            d_vs_low: spearman(&d, &in_lim.low_lambda).ok(),
            d_vs_high: spearman(&d, &in_lim.high_lambda).ok(),
        });
    }
    Ok(rows)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

fn write_file(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    f(&mut file)?;
    file.flush()?;
    Ok(())
}

fn write_histogram(path: &Path, values: &[f64], bins: usize) -> Result<()> {
    let h = histogram(values, bins);
    let rows: Vec<Vec<String>> = h
        .counts
        .iter()
        .enumerate()
        .map(|(k, c)| vec![k.to_string(), fmt_sig(h.edges[k]), fmt_sig(h.edges[k + 1]), c.to_string()])
        .collect();
    write_file(path, |f| write_csv_rows(f, &["bin", "lower", "upper", "count"], &rows))
}

fn write_distribution(dir: &Path, stem: &str, m: &Matrix, economy: &Economy) -> Result<()> {
    let countries = economy.labels().countries().to_vec();
    write_file(&dir.join(format!("{stem}.csv")), |f| {
        Ok(write_matrix_csv(m, Some(&economy.node_labels()), Some(&countries), f)?)
    })?;
    write_file(&dir.join(format!("{stem}.bin")), |f| Ok(write_matrix_binary(m, f)?))
}

/// Writes every per-year file of `analyze` into `dir`.
pub fn write_analysis(dir: &Path, economy: &Economy, a: &Analysis, config: &RunConfig) -> Result<()> {
    let labels = economy.labels();
    let u = a.upstreamness();
    let d = a.downstreamness();
    let rows: Vec<Vec<String>> = economy
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, node)| {
            vec![
                labels.node_label(node.flat),
                labels.countries()[node.country - 1].clone(),
                labels.sectors()[node.sector - 1].clone(),
                fmt_sig(u[k]),
                fmt_sig(d[k]),
                fmt_sig(a.output_stats.h[k]),
                fmt_sig(a.input_stats.h[k]),
                fmt_sig(a.output_stats.l[(k, k)]),
                fmt_sig(a.input_stats.l[(k, k)]),
                fmt_sig(a.product[k]),
            ]
        })
        .collect();
    write_file(&dir.join("nodes.csv"), |f| {
        write_csv_rows(
            f,
            &["node", "country", "sector", "u", "d", "h_out", "h_in", "l_out_diag", "l_in_diag", "rho_prod"],
            &rows,
        )
    })?;

    write_json(
        &dir.join("spectral.json"),
        &SpectralFile {
            year: a.year,
            lambda: a.spectral_b.lambda,
            product_distribution: &a.product,
            product_gap: a.product_gap,
            input_network: &a.spectral_a,
            output_network: &a.spectral_b,
        },
    )?;

    write_distribution(dir, "m", &a.m, economy)?;
    write_distribution(dir, "zeta", &a.zeta, economy)?;
    for code in &config.sectors {
        let r = resolve_sector(economy, code)?;
        let sector = &labels.sectors()[r - 1];
        for (stem, dist) in [("pp", &a.m), ("wp", &a.zeta)] {
            let im = industry_matrix(dist, economy, r)?;
            write_file(&dir.join(format!("{stem}_{sector}.csv")), |f| {
                Ok(write_matrix_csv(&im.matrix, Some(labels.countries()), Some(labels.countries()), f)?)
            })?;
        }
    }

    let countries = economy.node_countries();
    let j = labels.n_countries();
    let mu = country_means(u, &countries, j);
    let md = country_means(d, &countries, j);
    write_json(
        &dir.join("indicators.json"),
        &IndicatorFile {
            year: a.year,
            indicators: &a.indicators,
            blocks_a: &a.blocks_a,
            blocks_b: &a.blocks_b,
            country_means: labels
                .countries()
                .iter()
                .enumerate()
                .map(|(c, code)| CountryMean {
                    country: code.clone(),
                    upstreamness: mu[c],
                    downstreamness: md[c],
                })
                .collect(),
        },
    )?;

    write_histogram(&dir.join("hist_product.csv"), &a.product, config.bins)?;
    write_histogram(&dir.join("hist_upstreamness.csv"), u, config.bins)?;
    write_histogram(&dir.join("hist_downstreamness.csv"), d, config.bins)?;

    let sweep = kappa_sweep(a, &config.kappa_grid)?;
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|r| {
            vec![
                fmt_sig(r.kappa),
                opt_cell(r.u_vs_low),
                opt_cell(r.u_vs_high),
                opt_cell(r.d_vs_low),
                opt_cell(r.d_vs_high),
            ]
        })
        .collect();
    write_file(&dir.join("kappa_sweep.csv"), |f| {
        write_csv_rows(
            f,
            &["kappa", "spearman_u_low", "spearman_u_high", "spearman_d_low", "spearman_d_high"],
            &rows,
        )
    })
}

/// `analyze`: one output directory per year.
pub fn cmd_analyze(config: &RunConfig) -> Result<u8> {
    let years = load_inputs(config)?;
    let out = config
        .out_dir()?
        .ok_or_else(|| GvcError::Parameter("analyze needs --out".into()))?;
    let results: Vec<Result<()>> = in_pool(config.jobs, || {
        use rayon::prelude::*;
        years
            .par_iter()
            .map(|y| {
                let year = y.economy.year();
                let a = analyze(&y.economy, config.tol_eig).inspect_err(|e| {
                    log::error!("year {year}: {e}");
                })?;
                let dir = year_dir(&out, year)?;
                write_json(&dir.join("validation.json"), &y.report)?;
                write_analysis(&dir, &y.economy, &a, config)?;
                println!(
                    "year {year}: n={} lambda={} gdva={} gdfu={}",
                    y.economy.n(),
                    fmt_sig(a.spectral_b.lambda),
                    fmt_sig(a.indicators.gdva_fraction),
                    fmt_sig(a.indicators.gdfu_fraction)
                );
                Ok(())
            })
            .collect()
    })?;
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(EXIT_OK)
}

/// `verify`: exit 0 iff every check on every year passes.
pub fn cmd_verify(config: &RunConfig) -> Result<u8> {
    let years = load_inputs(config)?;
    let out = config.out_dir()?;
    let opts = VerifyOptions {
        tol_eig: config.tol_eig,
        seed: config.seed,
        n_paths: config.n_paths,
        ..VerifyOptions::default()
    };
    let mut reports: Vec<VerifyReport> = Vec::new();
    for y in &years {
        let report = verify_economy(&y.economy, &opts)?;
        for c in &report.checks {
            println!(
                "{} year {}: {}: measured {} threshold {}{}",
                if c.passed { "PASS" } else { "FAIL" },
                report.year,
                c.name,
                fmt_sig(c.measured),
                fmt_sig(c.threshold),
                c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            );
        }
        reports.push(report);
    }
    if let Some(dir) = &out {
        write_json(&dir.join("verify.json"), &reports)?;
    }
    Ok(if reports.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

/// `report`: panel table over all years.
pub fn cmd_report(config: &RunConfig) -> Result<u8> {
    let years = load_inputs(config)?;
    let economies: Vec<Economy> = years.into_iter().map(|y| y.economy).collect();
    let rows: Vec<PanelRow> = in_pool(config.jobs, || panel_report(&economies, config.tol_eig))??;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let g = &r.indicators;
            vec![
                r.year.to_string(),
                r.n.to_string(),
                fmt_sig(r.lambda),
                fmt_sig(r.blocks_a.diag_mean),
                fmt_sig(r.blocks_a.offdiag_mean),
                fmt_sig(r.blocks_b.diag_mean),
                fmt_sig(r.blocks_b.offdiag_mean),
                fmt_sig(g.gdva),
                fmt_sig(g.gieva),
                fmt_sig(g.gdfu),
                fmt_sig(g.giefu),
                fmt_sig(g.gdva_fraction),
                fmt_sig(g.gieva_fraction),
                fmt_sig(g.gdfu_fraction),
                fmt_sig(g.giefu_fraction),
            ]
        })
        .collect();
    let header = [
        "year",
        "n",
        "lambda",
        "a_diag_mean",
        "a_offdiag_mean",
        "b_diag_mean",
        "b_offdiag_mean",
        "gdva",
        "gieva",
        "gdfu",
        "giefu",
        "gdva_fraction",
        "gieva_fraction",
        "gdfu_fraction",
        "giefu_fraction",
    ];
    match config.out_dir()? {
        Some(dir) => {
            write_file(&dir.join("panel.csv"), |f| write_csv_rows(f, &header, &table))?;
            write_json(&dir.join("panel.json"), &rows)?;
        }
        None => write_csv_rows(&mut std::io::stdout().lock(), &header, &table)?,
    }
    Ok(EXIT_OK)
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let (args, cmd): (CommonArgs, fn(&RunConfig) -> Result<u8>) = match cli.command {
        Command::Validate(a) => (a, cmd_validate),
        Command::Analyze(a) => (a, cmd_analyze),
        Command::Verify(a) => (a, cmd_verify),
        Command::Report(a) => (a, cmd_report),
    };
    let result = RunConfig::resolve(args).and_then(|config| cmd(&config));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Installs the logger; the level comes from `GVC_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::default().filter_or("GVC_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_grid_parsing() {
        let g: KappaGrid = "0.1:0.5:5".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 5);
        assert!((v[4] - 0.5).abs() < 1e-15);
        assert!("0:1:3".parse::<KappaGrid>().is_err());
        assert!("1:2".parse::<KappaGrid>().is_err());
        assert_eq!("0.3:0.3:1".parse::<KappaGrid>().unwrap().values(), vec![0.3]);
    }

    #[test]
    fn flags_beat_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "seed = 5\npaths = 10\nsynthetic = J=2 S=2\n").unwrap();
        let args = CommonArgs {
            config: Some(cfg),
            seed: Some(9),
            ..CommonArgs::default()
        };
        let c = RunConfig::resolve(args).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.n_paths, 10);
        assert_eq!(c.synthetic.unwrap().countries, 2);
        assert_eq!(c.tau_acct, TAU_ACCT_SYNTHETIC);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["gvc", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["gvc", "validate"]), EXIT_USAGE);
        assert_eq!(run(["gvc", "validate", "/no/such/file.csv"]), EXIT_USAGE);
    }
}
