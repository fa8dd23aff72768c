//! Writes a random economy as a canonical CSV table and as a long-format
//! WIOD table, reads both back and reports the accounting check and the
//! largest change of any flow.
//!
//!     cargo run --example table_round_trip -- /tmp/tables

use std::fs::File;
use std::path::PathBuf;

use gvc::ingest::{read_path, random_economy, write_canonical_csv, write_wiot_long_digits, ColumnMap, Format, SyntheticSpec};
use gvc::model::TAU_ACCT_INGESTED;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string()));
    std::fs::create_dir_all(&dir)?;
    let economy = random_economy(&SyntheticSpec {
        countries: 3,
        sectors: 4,
        seed: 9,
        ..SyntheticSpec::default()
    })?
    .scaled(2.5e4)?
    .with_year(2014)
    .with_units("USD millions");
    let columns = ColumnMap::default();

    let canonical = dir.join("economy_2014.csv");
    write_canonical_csv(&economy, File::create(&canonical)?)?;
    // six significant digits, the precision of a typical published table
    let wiod = dir.join("wiot_2014_long.csv");
    write_wiot_long_digits(&economy, File::create(&wiod)?, &columns, 6)?;

    for (path, format) in [(&canonical, Format::Canonical), (&wiod, Format::Wiod)] {
        let back = read_path(path, format, &columns, TAU_ACCT_INGESTED)?;
        let r = &back.report;
        println!(
            "{}: year {} units '{}' passes {} (max residual {:.2e}), largest flow change {:.3e}",
            path.display(),
            back.economy.year(),
            back.economy.units(),
            r.passes,
            r.max_output_rel.max(r.max_value_added_rel),
            economy.z().max_abs_diff(back.economy.z()).max(economy.f().max_abs_diff(back.economy.f()))
        );
    }
    Ok(())
}
