//! Turning external tables and generator specs into [`Economy`] values.
//!
//! Two file formats are supported: the crate's own canonical record CSV and
//! a long (one row per cell) WIOD-style export. Both are described in
//! `docs/formats.md`.

mod canonical;
mod synthetic;
mod wiod;

pub use canonical::{parse_canonical_csv, write_canonical_csv, write_canonical_csv_digits};
pub use synthetic::{chain_example, random_economy, SyntheticSpec};
pub use wiod::{parse_wiot_long, write_wiot_long, write_wiot_long_digits, ColumnMap, FD_CATEGORIES};

use std::path::Path;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::{sanitize, validate, Economy, Labels, ValidationReport, EPS_ACTIVE};

/// A parsed economy together with its accounting report.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub economy: Economy,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Canonical,
    Wiod,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "canonical" => Ok(Format::Canonical),
            "wiod" => Ok(Format::Wiod),
            other => Err(format!("unknown format '{other}' (expected canonical or wiod)")),
        }
    }
}

/// Reads one file in the given format. `tolerance` is the relative
/// accounting tolerance used for the attached report.
pub fn read_path(path: &Path, format: Format, columns: &ColumnMap, tolerance: f64) -> Result<Ingested> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    match format {
        Format::Canonical => parse_canonical_csv(file, tolerance),
        Format::Wiod => parse_wiot_long(file, columns, tolerance),
    }
}

/// Raw table as read from a file, before sanitization.
pub(crate) struct RawTable {
    pub labels: Labels,
    pub z: Matrix,
    pub f: Matrix,
    /// Gross output and value added as stated by the file, if it had them.
    pub stated_x: Option<Vec<f64>>,
    pub stated_w: Option<Vec<f64>>,
    pub year: i32,
    pub units: String,
}

impl RawTable {
    /// Sanitizes, builds the economy and checks stated totals against the
    /// accounting identities.
    pub fn finish(self, tolerance: f64) -> Result<Ingested> {
        let RawTable {
            labels,
            z,
            f,
            stated_x,
            stated_w,
            year,
            units,
        } = self;
        let stated = match (stated_x, stated_w) {
            (None, None) => None,
            (sx, sw) => {
                // the file's own totals are checked against its raw flows;
                // clamping is reported separately
                let derived = Economy::from_components(labels.clone(), z.clone(), f.clone());
                let (dx, dw) = match &derived {
                    Ok(d) => (d.x().to_vec(), d.w().to_vec()),
                    Err(_) => (vec![0.0; z.rows()], vec![0.0; z.rows()]),
                };
                let x = sx.unwrap_or(dx);
                let w = sw.unwrap_or(dw);
                Some(Economy::from_parts(labels.clone(), z.clone(), f.clone(), x, w)?)
            }
        };
        let (economy, log) = sanitize(labels, z, f, EPS_ACTIVE)?;
        let economy = economy.with_year(year).with_units(units);
        let mut report = match &stated {
            Some(s) => validate(s, tolerance),
            None => validate(&economy, tolerance),
        };
        log.apply_to(&mut report);
        Ok(Ingested { economy, report })
    }
}
