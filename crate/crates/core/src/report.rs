//! Output tables: CSV with a leading provenance comment, numbers to 9 significant digits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies the run that produced a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(config_sha256: impl Into<String>) -> Self {
        Self { config_sha256: config_sha256.into(), tool_version: TOOL_VERSION.to_string() }
    }

    /// The comment line written at the top of every table.
    pub fn comment(&self) -> String {
        format!("pfha {} config_sha256={}", self.tool_version, self.config_sha256)
    }
}

/// Writes `# comment`, a header row and the rows.
pub fn write_table<I, R>(path: &Path, comment: &str, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let io_err = |e: std::io::Error| Error::file(path, e);
    let csv_err = |e: csv::Error| Error::file(path, e);
    let mut file = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(file, "# {comment}").map_err(io_err)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::file(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// Serialises an `f64` through [`crate::io::round_sig`] so JSON matches the CSV precision.
pub fn sig9<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(crate::io::round_sig(*x))
}
