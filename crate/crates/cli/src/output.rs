//! Staged command outputs.
//!
//! Commands compute everything first and collect their files here; nothing
//! touches the disk until [`Outputs::commit`], so a failing command leaves no
//! partial results behind.

use crate::error::CliResult;
use serde::Serialize;
use std::fs;
use std::path::Path;

#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    summary: Option<String>,
}

impl Outputs {
    /// Adds a JSON document with sorted keys; the first one added is also printed to stdout.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let err = |e: serde_json::Error| crate::error::CliError::Config(e.to_string());
        let mut text = serde_json::to_string_pretty(&serde_json::to_value(value).map_err(err)?).map_err(err)?;
        text.push('\n');
        if self.summary.is_none() {
            self.summary = Some(text.clone());
        }
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: Table) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::CliError::Config(e.to_string()))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// Writes every file under `dir` (via temporary names, then renames) and
    /// prints the summary document.
    pub fn commit(self, dir: Option<&Path>) -> CliResult<()> {
        if let Some(dir) = dir {
            fs::create_dir_all(dir)?;
            let mut staged = Vec::new();
            for (name, bytes) in &self.files {
                let tmp = dir.join(format!(".{name}.partial"));
                fs::write(&tmp, bytes)?;
                staged.push((tmp, dir.join(name)));
            }
            for (tmp, dest) in staged {
                fs::rename(tmp, dest)?;
            }
        }
        if let Some(s) = self.summary {
            print!("{s}");
        }
        Ok(())
    }
}

/// Rows of pre-formatted cells under a header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

/// Shortest round-trip formatting; empty for missing values.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
