//! Deterministic text output: 12-significant-digit number formatting and
//! JSON serialization with every float rounded the same way.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Significant digits kept in every written number.
pub const SIG_DIGITS: usize = 12;

/// Rounds to 12 significant digits.
pub fn round_sig(v: f64) -> f64 {
    round_digits(v, SIG_DIGITS)
}

pub fn round_digits(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits.max(1) - 1, v).parse().unwrap_or(v)
}

/// Shortest text that reads back as `round_sig(v)`.
pub fn fmt_sig(v: f64) -> String {
    fmt_digits(v, SIG_DIGITS)
}

pub fn fmt_digits(v: f64, digits: usize) -> String {
    let r = round_digits(v, digits);
    if r == 0.0 {
        return "0".into();
    }
    if !r.is_finite() {
        return if r.is_nan() { "NaN".into() } else if r > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = r.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().unwrap_or(0.0));
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to 12 significant digits. Object keys
/// keep struct declaration order, so the bytes only depend on the value.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Writes a header and rows of already formatted cells as CSV.
pub fn write_csv_rows(out: &mut impl Write, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::GvcError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::GvcError::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}
