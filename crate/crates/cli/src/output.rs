//! Report emission: sorted-key JSON or CSV (header row, comma, LF).

use std::io::Write;
use std::path::Path;

use mixbound::report::{self, ExperimentReport};

use crate::config::Format;
use crate::CliError;

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub struct Output {
    pub report: ExperimentReport,
    pub table: Table,
    pub default_format: Format,
    /// With CSV output, also print the JSON report on stderr.
    pub summary_on_stderr: bool,
}

pub fn float(x: f64) -> String {
    report::format_float(x)
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn csv_text(table: &Table) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))
}

pub fn emit(out: &Output, format: Option<Format>, path: Option<&Path>) -> Result<(), CliError> {
    let json = report::to_json(&out.report)?;
    let text = match format.unwrap_or(out.default_format) {
        Format::Json => json,
        Format::Csv => {
            if out.summary_on_stderr {
                eprint!("{json}");
            }
            csv_text(&out.table)?
        }
    };
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
