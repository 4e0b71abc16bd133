//! One-column signal ingestion and the CSV writers behind every command.
//! Values are written with full round-trip precision so downstream plotting
//! never needs the binary files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::{CliError, CliResult};

/// Read a scalar signal: one value per line, first comma-separated field,
/// `#` comments and blank lines skipped, an optional non-numeric header row
/// tolerated.
pub fn read_signal_csv(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut seen_data = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => {
                values.push(v);
                seen_data = true;
            }
            Err(_) if !seen_data => continue, // header row
            Err(_) => {
                return Err(CliError::Invalid(format!(
                    "{}:{}: not a number: {field:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::Invalid(format!(
            "{} holds no samples",
            path.display()
        )));
    }
    Ok(values)
}

pub struct CsvFile {
    out: BufWriter<File>,
}

impl CsvFile {
    pub fn create(path: &Path, header: &str) -> CliResult<CsvFile> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(CsvFile { out })
    }

    pub fn row(&mut self, fields: &[String]) -> CliResult<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Display for f64 is the shortest string that parses back exactly. Negative
/// zero (the identity of `Sum<f64>`) prints as plain zero.
pub fn fmt_f64(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v}")
}
