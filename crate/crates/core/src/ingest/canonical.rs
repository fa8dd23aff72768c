//! Canonical record CSV: one flow per line, optional `# key: value`
//! directives fixing code order, year and units.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::{Ingested, RawTable};
use crate::error::{GvcError, Result};
use crate::linalg::Matrix;
use crate::model::{Economy, Labels};
use crate::report::fmt_digits;

const HEADER: [&str; 6] = [
    "kind",
    "origin_country",
    "origin_sector",
    "dest_country",
    "dest_sector",
    "value",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Intermediate,
    Final,
    Output,
    ValueAdded,
}

impl Kind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "intermediate" => Some(Kind::Intermediate),
            "final" => Some(Kind::Final),
            "output" => Some(Kind::Output),
            "value_added" => Some(Kind::ValueAdded),
            _ => None,
        }
    }
}

/// Code list that is either fixed by a directive or grows on first use.
struct Codes {
    what: &'static str,
    fixed: bool,
    list: Vec<String>,
    index: HashMap<String, usize>,
}

impl Codes {
    fn new(what: &'static str) -> Self {
        Self {
            what,
            fixed: false,
            list: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn declare(&mut self, codes: &str, line: usize) -> Result<()> {
        if self.fixed {
            return Err(GvcError::Parse {
                line,
                message: format!("{} declared twice", self.what),
            });
        }
        for code in codes.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            if self.index.insert(code.to_string(), self.list.len()).is_some() {
                return Err(GvcError::Parse {
                    line,
                    message: format!("duplicate {} code '{code}'", self.what),
                });
            }
            self.list.push(code.to_string());
        }
        self.fixed = true;
        Ok(())
    }

    fn get(&mut self, code: &str, line: usize) -> Result<usize> {
        if code.is_empty() {
            return Err(GvcError::Parse {
                line,
                message: format!("empty {} code", self.what),
            });
        }
        if let Some(&k) = self.index.get(code) {
            return Ok(k);
        }
        if self.fixed {
            return Err(GvcError::Parse {
                line,
                message: format!("{} code '{code}' was not declared", self.what),
            });
        }
        self.index.insert(code.to_string(), self.list.len());
        self.list.push(code.to_string());
        Ok(self.list.len() - 1)
    }
}

struct Record {
    kind: Kind,
    origin: (usize, usize),
    dest_country: Option<usize>,
    dest_sector: Option<usize>,
    value: f64,
}

/// Parses a canonical CSV stream. Intermediate and final records accumulate
/// into `Z` and `F`; optional `output` and `value_added` records carry the
/// table's own totals, which are then checked at relative tolerance
/// `tolerance`.
pub fn parse_canonical_csv<R: Read>(mut input: R, tolerance: f64) -> Result<Ingested> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;

    let mut countries = Codes::new("country");
    let mut sectors = Codes::new("sector");
    let mut year = 0i32;
    let mut units = String::from("unspecified");
    for (k, line) in text.lines().enumerate() {
        let Some(rest) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = rest.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "countries" => countries.declare(value, k + 1)?,
            "sectors" => sectors.declare(value, k + 1)?,
            "year" => {
                year = value.parse().map_err(|_| GvcError::Parse {
                    line: k + 1,
                    message: format!("bad year '{value}'"),
                })?
            }
            "units" => units = value.to_string(),
            _ => {}
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_error(e, 1))?.clone();
    if header.is_empty() {
        return Err(GvcError::EmptyInput);
    }
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(GvcError::Parse {
            line: header.position().map_or(1, |p| p.line() as usize),
            message: format!("expected header '{}'", HEADER.join(",")),
        });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != HEADER.len() {
            return Err(GvcError::Parse {
                line,
                message: format!("{} fields, expected {}", row.len(), HEADER.len()),
            });
        }
        let kind = Kind::parse(&row[0]).ok_or_else(|| GvcError::Parse {
            line,
            message: format!("unknown kind '{}'", &row[0]),
        })?;
        let origin = (countries.get(&row[1], line)?, sectors.get(&row[2], line)?);
        let (dest_country, dest_sector) = match kind {
            Kind::Intermediate => {
                if row[4].is_empty() {
                    return Err(GvcError::Parse {
                        line,
                        message: "intermediate record without dest_sector".into(),
                    });
                }
                (Some(countries.get(&row[3], line)?), Some(sectors.get(&row[4], line)?))
            }
            Kind::Final => {
                if !row[4].is_empty() {
                    return Err(GvcError::Parse {
                        line,
                        message: "final record must leave dest_sector empty".into(),
                    });
                }
                (Some(countries.get(&row[3], line)?), None)
            }
            Kind::Output | Kind::ValueAdded => {
                if !row[3].is_empty() || !row[4].is_empty() {
                    return Err(GvcError::Parse {
                        line,
                        message: "total records leave both destination fields empty".into(),
                    });
                }
                (None, None)
            }
        };
        let value: f64 = row[5].parse().map_err(|_| GvcError::Parse {
            line,
            message: format!("bad value '{}'", &row[5]),
        })?;
        if !value.is_finite() {
            return Err(GvcError::Parse {
                line,
                message: format!("non-finite value '{}'", &row[5]),
            });
        }
        records.push(Record {
            kind,
            origin,
            dest_country,
            dest_sector,
            value,
        });
    }
    if records.is_empty() {
        return Err(GvcError::EmptyInput);
    }

    let labels = Labels::new(countries.list, sectors.list)?;
    let s = labels.n_sectors();
    let n = labels.n_nodes();
    let flat = |(c, r): (usize, usize)| c * s + r;
    let mut z = Matrix::zeros(n, n);
    let mut f = Matrix::zeros(n, labels.n_countries());
    let mut stated_x: Option<Vec<f64>> = None;
    let mut stated_w: Option<Vec<f64>> = None;
    for r in &records {
        let i = flat(r.origin);
        match r.kind {
            Kind::Intermediate => {
                let j = flat((r.dest_country.unwrap_or(0), r.dest_sector.unwrap_or(0)));
                z[(i, j)] += r.value;
            }
            Kind::Final => f[(i, r.dest_country.unwrap_or(0))] += r.value,
            Kind::Output => stated_x.get_or_insert_with(|| vec![0.0; n])[i] += r.value,
            Kind::ValueAdded => stated_w.get_or_insert_with(|| vec![0.0; n])[i] += r.value,
        }
    }
    RawTable {
        labels,
        z,
        f,
        stated_x,
        stated_w,
        year,
        units,
    }
    .finish(tolerance)
}

fn parse_error(e: csv::Error, fallback_line: usize) -> GvcError {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => GvcError::Io(io),
        other => GvcError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes an economy as canonical CSV with values at 12 significant digits.
pub fn write_canonical_csv<W: Write>(economy: &Economy, out: W) -> Result<()> {
    write_canonical_csv_digits(economy, out, crate::report::SIG_DIGITS)
}

/// Same as [`write_canonical_csv`] with a chosen number of significant digits.
pub fn write_canonical_csv_digits<W: Write>(economy: &Economy, out: W, digits: usize) -> Result<()> {
    let labels = economy.labels();
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "# countries: {}", labels.countries().join(","))?;
    writeln!(out, "# sectors: {}", labels.sectors().join(","))?;
    writeln!(out, "# year: {}", economy.year())?;
    writeln!(out, "# units: {}", economy.units())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(crate::report::csv_err)?;
    let code = |k: usize| {
        let node = economy.nodes()[k];
        (
            labels.countries()[node.country - 1].as_str(),
            labels.sectors()[node.sector - 1].as_str(),
        )
    };
    let n = economy.n();
    for i in 0..n {
        let (oc, os) = code(i);
        for j in 0..n {
            let v = economy.z()[(i, j)];
            if v != 0.0 {
                let (dc, ds) = code(j);
                w.write_record(["intermediate", oc, os, dc, ds, &fmt_digits(v, digits)])
                    .map_err(crate::report::csv_err)?;
            }
        }
    }
    for i in 0..n {
        let (oc, os) = code(i);
        for (c, dc) in labels.countries().iter().enumerate() {
            let v = economy.f()[(i, c)];
            if v != 0.0 {
                w.write_record(["final", oc, os, dc, "", &fmt_digits(v, digits)])
                    .map_err(crate::report::csv_err)?;
            }
        }
    }
    for i in 0..n {
        let (oc, os) = code(i);
        w.write_record(["output", oc, os, "", "", &fmt_digits(economy.x()[i], digits)])
            .map_err(crate::report::csv_err)?;
        w.write_record(["value_added", oc, os, "", "", &fmt_digits(economy.w()[i], digits)])
            .map_err(crate::report::csv_err)?;
    }
    w.flush()?;
    Ok(())
}
