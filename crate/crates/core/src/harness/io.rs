//! CSV and JSON persistence for data sets and experiment results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{AggregateRow, ExperimentConfig, ExperimentResult, ReplicateFailure, ResultRow};
use crate::error::{Error, Result};
use crate::sample::SampleBatch;

/// Fixed leading columns of the results CSV; `theta_0, theta_1, …` follow.
pub const CSV_HEADER: [&str; 7] = ["sweep_value", "replicate", "statistic", "p_value", "reject", "seed", "elapsed_ms"];

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// Parses CSV text with one observation per row. A first row containing any
/// non-numeric field is treated as a header.
pub fn parse_samples_csv(text: &str) -> Result<SampleBatch> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header_seen = false;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if rows.is_empty() && !header_seen => {
                header_seen = true;
                continue;
            }
            Err(e) => return Err(Error::Parse { line, msg: format!("non-numeric field: {e}") }),
        };
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line, msg: "non-finite value".into() });
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse { line, msg: format!("expected {} columns, found {}", first.len(), row.len()) });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    }
    SampleBatch::from_rows(&rows)
}

pub fn load_samples_csv(path: &Path) -> Result<SampleBatch> {
    parse_samples_csv(&fs::read_to_string(path)?)
}

/// Writes a sample with a `x0,x1,…` header.
pub fn write_samples_csv(samples: &SampleBatch, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record((0..samples.dim()).map(|j| format!("x{j}")))?;
    for row in samples.rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    aggregate: &'a [AggregateRow],
    failures: &'a [ReplicateFailure],
}

/// Writes `<dir>/<name>.csv` and the `<dir>/<name>.json` sidecar holding the
/// configuration and the aggregated rejection rates.
pub fn emit_results(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if result.rows.is_empty() {
        return Err(Error::InvalidParameter("no result rows to write".into()));
    }
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", config.name));
    let json_path = dir.join(format!("{}.json", config.name));
    let k = result.rows.iter().map(|r| r.theta_hat.len()).max().unwrap_or(0);
    let mut w = writer(&csv_path)?;
    w.write_record(CSV_HEADER.iter().map(|s| s.to_string()).chain((0..k).map(|j| format!("theta_{j}"))))?;
    for r in &result.rows {
        let fixed = [
            r.sweep_value.to_string(),
            r.replicate.to_string(),
            r.statistic.to_string(),
            r.p_value.to_string(),
            u8::from(r.reject).to_string(),
            r.seed.to_string(),
            r.elapsed_ms.to_string(),
        ];
        let theta = (0..k).map(|j| r.theta_hat.get(j).copied().unwrap_or(f64::NAN).to_string());
        w.write_record(fixed.into_iter().chain(theta))?;
    }
    w.flush()?;
    let sidecar = Sidecar { config, aggregate: &result.aggregate, failures: &result.failures };
    fs::write(&json_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok((csv_path, json_path))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse { line, msg: format!("bad value in column {}", i + 1) })
}

/// Reads a results CSV written by [`emit_results`]. Failed rows come back
/// with an empty θ̂.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < CSV_HEADER.len() || header.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse { line: 1, msg: "unexpected results header".into() });
    }
    let k = header.len() - CSV_HEADER.len();
    let mut rows = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = idx + 2;
        let reject: u8 = field(&rec, 4, line)?;
        let p_value: f64 = field(&rec, 3, line)?;
        let theta: Vec<f64> = (0..k).map(|j| field(&rec, CSV_HEADER.len() + j, line)).collect::<Result<_>>()?;
        rows.push(ResultRow {
            sweep_value: field(&rec, 0, line)?,
            replicate: field(&rec, 1, line)?,
            statistic: field(&rec, 2, line)?,
            p_value,
            reject: reject == 1,
            theta_hat: if p_value.is_nan() { Vec::new() } else { theta },
            seed: field(&rec, 5, line)?,
            elapsed_ms: field(&rec, 6, line)?,
        });
    }
    Ok(rows)
}
