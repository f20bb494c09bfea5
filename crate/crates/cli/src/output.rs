use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliResult;

/// Column-ordered records sharing one header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write_csv(w: impl Write, table: &Table, cfg: &RunConfig) -> CliResult<()> {
    let mut w = w;
    writeln!(w, "# nngp-info {}", nngp_info::VERSION)?;
    writeln!(w, "# config: {}", serde_json::to_string(cfg)?)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(&table.columns)?;
    for row in &table.rows {
        csv.write_record(row.iter().map(cell))?;
    }
    csv.flush()?;
    Ok(())
}

fn write_json(mut w: impl Write, table: &Table, cfg: &RunConfig) -> CliResult<()> {
    let config = serde_json::to_value(cfg)?;
    let records: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut obj: Map<String, Value> = table
                .columns
                .iter()
                .cloned()
                .zip(row.iter().cloned())
                .collect();
            obj.insert("config".into(), config.clone());
            obj.insert("version".into(), Value::from(nngp_info::VERSION));
            Value::Object(obj)
        })
        .collect();
    serde_json::to_writer_pretty(&mut w, &records)?;
    writeln!(w)?;
    Ok(())
}

fn write_table(w: impl Write, table: &Table, cfg: &RunConfig) -> CliResult<()> {
    match cfg.format {
        Format::Csv => write_csv(w, table, cfg),
        Format::Json => write_json(w, table, cfg),
    }
}

/// `runs.csv` becomes `runs.summary.csv`.
pub fn summary_path(out: &Path, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.{ext}"))
}

/// Writes the main table to `--out` or stdout. A summary table goes to a
/// sibling file, or follows the main table on stdout after a blank line.
pub fn emit(cfg: &RunConfig, table: &Table, summary: Option<&Table>) -> CliResult<()> {
    match &cfg.out {
        Some(path) => {
            write_table(BufWriter::new(File::create(path)?), table, cfg)?;
            if let Some(s) = summary {
                write_table(
                    BufWriter::new(File::create(summary_path(path, cfg.format))?),
                    s,
                    cfg,
                )?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_table(&mut lock, table, cfg)?;
            if let Some(s) = summary {
                writeln!(lock)?;
                write_table(&mut lock, s, cfg)?;
            }
            lock.flush()?;
        }
    }
    Ok(())
}
