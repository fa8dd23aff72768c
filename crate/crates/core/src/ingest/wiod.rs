//! Long-format WIOD export: one row per (origin country, origin sector,
//! destination country, use category) cell, plus gross-output and
//! value-added rows under a pseudo-country.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use super::{Ingested, RawTable};
use crate::error::{GvcError, Result};
use crate::linalg::Matrix;
use crate::model::{Economy, Labels};
use crate::report::{csv_err, fmt_digits};

/// Final-demand use categories of the 2016 release, summed per destination.
pub const FD_CATEGORIES: [&str; 5] = ["CONS_h", "CONS_np", "CONS_g", "GFCF", "INVEN"];

/// Column names and special codes of a long-format file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub year: String,
    pub row_country: String,
    pub row_item: String,
    pub col_country: String,
    pub col_item: String,
    pub value: String,
    /// Pseudo-country carried by the gross-output and value-added rows.
    pub total_country: String,
    pub value_added_item: String,
    pub gross_output_item: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            year: "Year".into(),
            row_country: "RowCountry".into(),
            row_item: "RowItem".into(),
            col_country: "ColCountry".into(),
            col_item: "ColItem".into(),
            value: "Value".into(),
            total_country: "TOT".into(),
            value_added_item: "VA".into(),
            gross_output_item: "GO".into(),
        }
    }
}

impl ColumnMap {
    /// Reads `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let mut map = Self::default();
        for (k, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| GvcError::Parse {
                line: k + 1,
                message: "expected key=value".into(),
            })?;
            let value = value.trim().to_string();
            let slot = match key.trim() {
                "year" => &mut map.year,
                "row_country" => &mut map.row_country,
                "row_item" => &mut map.row_item,
                "col_country" => &mut map.col_country,
                "col_item" => &mut map.col_item,
                "value" => &mut map.value,
                "total_country" => &mut map.total_country,
                "value_added_item" => &mut map.value_added_item,
                "gross_output_item" => &mut map.gross_output_item,
                other => {
                    return Err(GvcError::Parse {
                        line: k + 1,
                        message: format!("unknown column-map key '{other}'"),
                    })
                }
            };
            *slot = value;
        }
        Ok(map)
    }
}

/// Interns codes in order of first appearance.
#[derive(Default)]
struct Interner {
    list: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn id(&mut self, code: &str) -> u32 {
        if let Some(&k) = self.index.get(code) {
            return k;
        }
        let k = self.list.len() as u32;
        self.index.insert(code.to_string(), k);
        self.list.push(code.to_string());
        k
    }
}

#[derive(Clone, Copy)]
enum Use {
    Sector(u32),
    Final,
}

struct Cell {
    line: usize,
    row_country: u32,
    row_sector: u32,
    col_country: u32,
    col: Use,
    value: f64,
}

enum Total {
    Output,
    ValueAdded,
}

/// Parses a long-format WIOD table for a single year.
///
/// Countries and sectors are numbered in order of first appearance. Every
/// country must carry the same sector list; the five final-demand
/// categories are summed into the destination country's column of `F`.
pub fn parse_wiot_long<R: Read>(input: R, columns: &ColumnMap, tolerance: f64) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(GvcError::EmptyInput);
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| {
        find(name).ok_or_else(|| GvcError::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let col_year = find(&columns.year);
    let (rc, ri, cc, ci, cv) = (
        need(&columns.row_country)?,
        need(&columns.row_item)?,
        need(&columns.col_country)?,
        need(&columns.col_item)?,
        need(&columns.value)?,
    );

    let mut countries = Interner::default();
    let mut sectors = Interner::default();
    let mut cells = Vec::new();
    let mut totals = Vec::new();
    let mut year: Option<i32> = None;
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| row.get(k).unwrap_or("");
        let value: f64 = field(cv).parse().map_err(|_| GvcError::Parse {
            line,
            message: format!("bad value '{}'", field(cv)),
        })?;
        if !value.is_finite() {
            return Err(GvcError::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        if let Some(k) = col_year {
            let y: i32 = field(k).parse().map_err(|_| GvcError::Parse {
                line,
                message: format!("bad year '{}'", field(k)),
            })?;
            match year {
                None => year = Some(y),
                Some(prev) if prev != y => {
                    return Err(GvcError::Parse {
                        line,
                        message: format!("year {y} in a table for {prev}"),
                    })
                }
                _ => {}
            }
        }
        if field(cc) == columns.total_country {
            // row totals are recomputed from the cells
            continue;
        }
        let col_country = countries.id(field(cc));
        let col_item = field(ci);
        if field(rc) == columns.total_country {
            let kind = if field(ri) == columns.gross_output_item {
                Total::Output
            } else if field(ri) == columns.value_added_item {
                Total::ValueAdded
            } else {
                // other aggregate rows (taxes, margins, totals) are not used
                continue;
            };
            let sector = sectors.id(col_item);
            totals.push((line, kind, col_country, sector, value));
            continue;
        }
        let row_country = countries.id(field(rc));
        let row_sector = sectors.id(field(ri));
        let col = if FD_CATEGORIES.contains(&col_item) {
            Use::Final
        } else {
            Use::Sector(sectors.id(col_item))
        };
        cells.push(Cell {
            line,
            row_country,
            row_sector,
            col_country,
            col,
            value,
        });
    }
    if cells.is_empty() {
        return Err(GvcError::EmptyInput);
    }

    // a use-category that never shows up as an origin sector is unknown
    let mut is_sector = vec![false; sectors.list.len()];
    let mut seen = vec![vec![false; sectors.list.len()]; countries.list.len()];
    for c in &cells {
        is_sector[c.row_sector as usize] = true;
        seen[c.row_country as usize][c.row_sector as usize] = true;
    }
    for c in &cells {
        if let Use::Sector(s) = c.col {
            if !is_sector[s as usize] {
                return Err(GvcError::Parse {
                    line: c.line,
                    message: format!("unknown use category '{}'", sectors.list[s as usize]),
                });
            }
        }
    }
    for (line, _, _, s, _) in &totals {
        if !is_sector[*s as usize] {
            return Err(GvcError::Parse {
                line: *line,
                message: format!("total row for unknown sector '{}'", sectors.list[*s as usize]),
            });
        }
    }
    // every country block must list the same sectors
    let sector_ids: Vec<usize> = (0..sectors.list.len()).filter(|&s| is_sector[s]).collect();
    let origin_countries: Vec<bool> = seen.iter().map(|row| row.iter().any(|&b| b)).collect();
    for (c, row) in seen.iter().enumerate() {
        if !origin_countries[c] {
            return Err(GvcError::Labels(format!(
                "country '{}' appears only as a destination",
                countries.list[c]
            )));
        }
        if let Some(&s) = sector_ids.iter().find(|&&s| !row[s]) {
            return Err(GvcError::Labels(format!(
                "country '{}' has no rows for sector '{}'",
                countries.list[c], sectors.list[s]
            )));
        }
    }

    let mut sector_pos = vec![usize::MAX; sectors.list.len()];
    for (k, &s) in sector_ids.iter().enumerate() {
        sector_pos[s] = k;
    }
    let labels = Labels::new(
        countries.list.clone(),
        sector_ids.iter().map(|&s| sectors.list[s].clone()).collect(),
    )?;
    let s_count = labels.n_sectors();
    let n = labels.n_nodes();
    let flat = |c: u32, s: u32| c as usize * s_count + sector_pos[s as usize];
    let mut z = Matrix::zeros(n, n);
    let mut f = Matrix::zeros(n, labels.n_countries());
    for c in &cells {
        let i = flat(c.row_country, c.row_sector);
        match c.col {
            Use::Sector(s) => z[(i, flat(c.col_country, s))] += c.value,
            Use::Final => f[(i, c.col_country as usize)] += c.value,
        }
    }
    let mut stated_x = None;
    let mut stated_w = None;
    for (_, kind, c, s, v) in totals {
        let slot = match kind {
            Total::Output => &mut stated_x,
            Total::ValueAdded => &mut stated_w,
        };
        slot.get_or_insert_with(|| vec![0.0; n])[flat(c, s)] += v;
    }
    RawTable {
        labels,
        z,
        f,
        stated_x,
        stated_w,
        year: year.unwrap_or(0),
        units: "unspecified".into(),
    }
    .finish(tolerance)
}

/// Writes the economy in long format with 12 significant digits. Final use
/// is written under the first final-demand category.
pub fn write_wiot_long<W: Write>(economy: &Economy, out: W, columns: &ColumnMap) -> Result<()> {
    write_wiot_long_digits(economy, out, columns, crate::report::SIG_DIGITS)
}

pub fn write_wiot_long_digits<W: Write>(
    economy: &Economy,
    out: W,
    columns: &ColumnMap,
    digits: usize,
) -> Result<()> {
    let labels: &Labels = economy.labels();
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(out));
    w.write_record([
        &columns.year,
        &columns.row_country,
        &columns.row_item,
        &columns.col_country,
        &columns.col_item,
        &columns.value,
    ])
    .map_err(csv_err)?;
    let year = economy.year().to_string();
    let code = |k: usize| {
        let node = economy.nodes()[k];
        (
            labels.countries()[node.country - 1].as_str(),
            labels.sectors()[node.sector - 1].as_str(),
        )
    };
    let n = economy.n();
    // the gross-output rows come first so codes are met in label order
    for k in 0..n {
        let (c, s) = code(k);
        let v = fmt_digits(economy.x()[k], digits);
        w.write_record([&year, &columns.total_country, &columns.gross_output_item, c, s, &v])
            .map_err(csv_err)?;
    }
    for i in 0..n {
        let (oc, os) = code(i);
        for j in 0..n {
            let v = economy.z()[(i, j)];
            if v != 0.0 {
                let (dc, ds) = code(j);
                w.write_record([year.as_str(), oc, os, dc, ds, &fmt_digits(v, digits)])
                    .map_err(csv_err)?;
            }
        }
        for (c, dc) in labels.countries().iter().enumerate() {
            let v = economy.f()[(i, c)];
            if v != 0.0 {
                w.write_record([year.as_str(), oc, os, dc, FD_CATEGORIES[0], &fmt_digits(v, digits)])
                    .map_err(csv_err)?;
            }
        }
    }
    for k in 0..n {
        let (c, s) = code(k);
        let v = fmt_digits(economy.w()[k], digits);
        w.write_record([&year, &columns.total_country, &columns.value_added_item, c, s, &v])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{random_economy, SyntheticSpec};

    fn two_by_two() -> String {
        let mut s = String::from("Year,RowCountry,RowItem,ColCountry,ColItem,Value\n");
        for (rc, ri) in [("AAA", "s1"), ("AAA", "s2"), ("BBB", "s1"), ("BBB", "s2")] {
            for (cc, ci) in [("AAA", "s1"), ("AAA", "s2"), ("BBB", "s1"), ("BBB", "s2")] {
                s += &format!("2014,{rc},{ri},{cc},{ci},1\n");
            }
            let split = [0.2, 0.3, 0.1, 0.25, 0.15];
            for (cat, v) in FD_CATEGORIES.iter().zip(split) {
                s += &format!("2014,{rc},{ri},AAA,{cat},{v}\n");
            }
        }
        s
    }

    #[test]
    fn final_demand_categories_sum() {
        let got = parse_wiot_long(two_by_two().as_bytes(), &ColumnMap::default(), 1e-4).unwrap();
        let e = got.economy;
        assert_eq!(e.n(), 4);
        assert_eq!(e.year(), 2014);
        for i in 0..4 {
            assert!((e.f()[(i, 0)] - 1.0).abs() < 1e-15);
            assert_eq!(e.f()[(i, 1)], 0.0);
        }
    }

    #[test]
    fn unknown_use_category() {
        let text = two_by_two() + "2014,AAA,s1,BBB,CONS_x,1\n";
        let err = parse_wiot_long(text.as_bytes(), &ColumnMap::default(), 1e-4).unwrap_err();
        assert!(matches!(err, GvcError::Parse { line: 38, .. }), "{err:?}");
    }

    #[test]
    fn inconsistent_country_blocks() {
        let text = two_by_two() + "2014,CCC,s1,AAA,s1,1\n";
        assert!(matches!(
            parse_wiot_long(text.as_bytes(), &ColumnMap::default(), 1e-4),
            Err(GvcError::Labels(_))
        ));
    }

    #[test]
    fn round_trip() {
        let spec = SyntheticSpec {
            countries: 3,
            sectors: 4,
            density: 0.6,
            seed: 11,
            ..SyntheticSpec::default()
        };
        let e = random_economy(&spec).unwrap().with_year(2009);
        let mut buf = Vec::new();
        write_wiot_long(&e, &mut buf, &ColumnMap::default()).unwrap();
        let back = parse_wiot_long(buf.as_slice(), &ColumnMap::default(), 1e-9).unwrap();
        assert!(back.report.passes);
        assert_eq!(back.economy.labels(), e.labels());
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        for i in 0..e.n() {
            for j in 0..e.n() {
                let b = e.z()[(i, j)];
                if b != 0.0 {
                    assert!(rel(back.economy.z()[(i, j)], b) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rounding_noise_passes_ingested_tolerance() {
        let spec = SyntheticSpec {
            countries: 2,
            sectors: 3,
            seed: 5,
            ..SyntheticSpec::default()
        };
        let e = random_economy(&spec).unwrap();
        let mut buf = Vec::new();
        write_wiot_long_digits(&e, &mut buf, &ColumnMap::default(), 6).unwrap();
        let back = parse_wiot_long(buf.as_slice(), &ColumnMap::default(), 1e-4).unwrap();
        assert!(back.report.passes);
        assert!(back.report.max_output_rel > 0.0);
    }

    #[test]
    fn column_map_file() {
        let text = "# renamed export\nvalue = v\nrow_country=rc\n";
        let m = ColumnMap::from_reader(text.as_bytes()).unwrap();
        assert_eq!(m.value, "v");
        assert_eq!(m.row_country, "rc");
        assert_eq!(m.col_item, "ColItem");
        assert!(ColumnMap::from_reader("nope=1".as_bytes()).is_err());
    }
}
