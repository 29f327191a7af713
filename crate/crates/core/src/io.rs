//! Shared plumbing for the delimited-text inputs and outputs.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// Parses an ISO-8601 timestamp. Offsets are honoured; naive values are taken as UTC.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, String> {
    let text = text.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(text) {
        return Ok(ts.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
            return Ok(naive.and_utc());
        }
    }
    if let Ok(date) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Ok(date.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    Err(format!("unparseable timestamp `{text}`"))
}

pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Years between two instants using a 365.25-day year.
pub fn years_between(start: &Timestamp, end: &Timestamp) -> f64 {
    (*end - *start).num_seconds() as f64 / (365.25 * 86_400.0)
}

/// Formats a number with 9 significant digits, `%g`-style, independent of locale.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        t.to_string()
    } else {
        s
    }
}

/// Rounds a value to 9 significant digits so that text round trips are exact.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("round trip")
}

pub(crate) fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).flexible(false).from_reader(reader)
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::file(path, e))
}

/// Deserialises every row of a delimited file, tagging failures with path and line.
pub(crate) fn read_rows<T: DeserializeOwned, R: Read>(reader: R, origin: &Path) -> Result<Vec<T>> {
    let mut rdr = csv_reader(reader);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        let row: T = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::file(origin, format!("line {line}: {e}"))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn read_file_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_rows(open(path)?, path)
}

/// Treats blank CSV fields as `None`.
pub(crate) fn blank_as_none<'de, D, V>(de: D) -> std::result::Result<Option<V>, D::Error>
where
    D: serde::Deserializer<'de>,
    V: std::str::FromStr,
    V::Err: std::fmt::Display,
{
    let raw: Option<String> = serde::Deserialize::deserialize(de)?;
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => s.parse().map(Some).map_err(serde::de::Error::custom),
    }
}
