//! CSV and JSON writers. Every file is UTF-8 with LF line endings.

use std::fs;
use std::path::Path;

use csv::{Terminator, WriterBuilder};
use serde::Serialize;

use crate::error::CliError;
use crate::experiment::SeriesTable;

pub const TRACE_COLUMNS: [&str; 7] = [
    "t",
    "F_hat",
    "subopt_running",
    "violation_agg_running",
    "violation_agg_cumclip",
    "lambda_norm",
    "max_staleness",
];

fn io_err(path: &Path, e: impl ToString) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_rows(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn columns(s: &SeriesTable, k: usize) -> [f64; 6] {
    [
        s.f_hat[k],
        s.subopt_running[k],
        s.violation_agg_running[k],
        s.violation_agg_cumclip[k],
        s.lambda_norm[k],
        s.max_staleness[k],
    ]
}

pub fn write_series(path: &Path, s: &SeriesTable) -> Result<(), CliError> {
    let header: Vec<String> = TRACE_COLUMNS.iter().map(|c| c.to_string()).collect();
    let rows = (0..s.t.len()).map(|k| {
        let mut row = vec![s.t[k].to_string()];
        row.extend(columns(s, k).iter().map(|v| v.to_string()));
        row
    });
    write_rows(path, &header, rows)
}

/// `t` followed by `<metric>_sync, <metric>_async` for every trace metric.
pub fn write_overlay(
    path: &Path,
    sync: &SeriesTable,
    asynchronous: &SeriesTable,
) -> Result<(), CliError> {
    let mut header = vec!["t".to_string()];
    for c in &TRACE_COLUMNS[1..] {
        header.push(format!("{c}_sync"));
        header.push(format!("{c}_async"));
    }
    let n = sync.t.len().min(asynchronous.t.len());
    let rows = (0..n).map(|k| {
        let mut row = vec![sync.t[k].to_string()];
        for (a, b) in columns(sync, k).iter().zip(columns(asynchronous, k)) {
            row.push(a.to_string());
            row.push(b.to_string());
        }
        row
    });
    write_rows(path, &header, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}
