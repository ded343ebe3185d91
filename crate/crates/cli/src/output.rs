//! Writers for the output files.
//!
//! CSV files have a header row and numbers in `{:.15e}` form, so reruns of
//! the same configuration are byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use chflow::{Field, Grid};
use serde::Serialize;

use crate::CliError;

pub fn number(v: f64) -> String {
    format!("{v:.15e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(|v| number(*v))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(e.into())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Two-column `x u` text with a `# t = ...` comment line.
pub fn write_snapshot(path: &Path, grid: &Grid, t: f64, u: &Field) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# t = {}", number(t))?;
    for (x, v) in grid.nodes().iter().zip(u.iter()) {
        writeln!(f, "{} {}", number(*x), number(*v))?;
    }
    f.flush()?;
    Ok(())
}
