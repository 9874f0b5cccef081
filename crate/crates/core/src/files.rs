//! CSV matrices, EEG trial files, JSON results and run manifests.
//!
//! Matrices are comma-separated, one subject per row, optionally preceded by
//! a header of feature names. EEG files hold one subject: trials are
//! separated by blank lines and each trial has one channel per row.
//! Numbers are written with Rust's shortest round-trip formatting, so
//! write-then-read is exact.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engine::AdamantResult;
use crate::error::{AdamantError, Result};
use crate::matrices::FeatureMatrix;

/// Everything needed to reproduce an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_x: Option<KernelGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_y: Option<KernelGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Command-specific settings (simulation configuration, bands, ...).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub settings: serde_json::Value,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, master_seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            inputs: Vec::new(),
            kernel_x: None,
            kernel_y: None,
            permutations: None,
            master_seed,
            output: None,
            settings: serde_json::Value::Null,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Kernel family and penalty list as given on the command line; `inf`
/// stands for the Euclidean limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGrid {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub label: String,
    pub statistic: f64,
    pub p_value: f64,
}

/// JSON layout of a `test` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub manifest: RunManifest,
    pub per_metric: Vec<MetricRecord>,
    pub min_p: f64,
    pub p_adamant: f64,
    pub selected_metric: String,
    #[serde(rename = "B")]
    pub permutations: usize,
    pub seed: u64,
}

impl TestReport {
    pub fn new(manifest: RunManifest, result: &AdamantResult) -> Self {
        TestReport {
            manifest,
            per_metric: result
                .per_metric()
                .iter()
                .map(|m| MetricRecord {
                    label: m.label.clone(),
                    statistic: m.statistic,
                    p_value: m.p_value,
                })
                .collect(),
            min_p: result.min_p(),
            p_adamant: result.adaptive_p(),
            selected_metric: result.selected_metric().to_string(),
            permutations: result.permutations(),
            seed: result.master_seed(),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AdamantError::io(path, e))
}

fn parse_cell(path: &Path, row: usize, column: usize, cell: &str) -> Result<f64> {
    let err = |message: &str| AdamantError::Parse {
        path: path.display().to_string(),
        row,
        column,
        message: message.to_string(),
    };
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return Err(err("missing value"));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| err(&format!("{cell:?} is not a number")))?;
    if !v.is_finite() {
        return Err(err("non-finite value"));
    }
    Ok(v)
}

/// Reads a numeric CSV matrix. Rows and columns in errors are 1-based line
/// and field numbers of the file.
pub fn load_matrix(path: impl AsRef<Path>, has_header: bool) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| AdamantError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(file);
    let csv_err = |e: csv::Error| {
        let row = e.position().map_or(0, |p| p.line() as usize);
        AdamantError::Parse {
            path: path.display().to_string(),
            row,
            column: 0,
            message: e.to_string(),
        }
    };
    let names = if has_header {
        Some(
            reader
                .headers()
                .map_err(csv_err)?
                .iter()
                .map(|h| h.trim().to_string())
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let mut width = names.as_ref().map(Vec::len);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(AdamantError::Parse {
                path: path.display().to_string(),
                row: line,
                column: record.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", record.len()),
            });
        }
        rows.push(
            record
                .iter()
                .enumerate()
                .map(|(j, cell)| parse_cell(path, line, j + 1, cell))
                .collect::<Result<_>>()?,
        );
    }
    if rows.is_empty() {
        return Err(AdamantError::Input(format!("{}: no data rows", path.display())));
    }
    let m = FeatureMatrix::from_rows(&rows)?;
    match names {
        Some(n) => m.with_names(n),
        None => Ok(m),
    }
}

fn matrix_csv(m: &DMatrix<f64>, names: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(names) = names {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes a matrix as CSV, with a header line when `names` is given.
pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>, names: Option<&[String]>) -> Result<()> {
    if let Some(n) = names {
        if n.len() != m.ncols() {
            return Err(AdamantError::Shape(format!(
                "{} names for {} columns",
                n.len(),
                m.ncols()
            )));
        }
    }
    write_text(path, &matrix_csv(m, names))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| AdamantError::io(path, e))
}

/// Pretty JSON with a trailing newline; keys follow field order.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Sidecar manifest path for a CSV output: `<file>.manifest.json`.
pub fn manifest_path(csv: &Path) -> std::path::PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

/// Writes a CSV table and its sidecar manifest.
pub fn write_table(path: impl AsRef<Path>, csv: &str, manifest: &RunManifest) -> Result<()> {
    let path = path.as_ref();
    write_text(path, csv)?;
    write_json(manifest_path(path), manifest)
}

/// Reads one subject's EEG trials (`channels × samples` each).
pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<DMatrix<f64>>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut trials = Vec::new();
    let mut block: Vec<Vec<f64>> = Vec::new();
    let mut flush = |block: &mut Vec<Vec<f64>>, line: usize| -> Result<()> {
        if block.is_empty() {
            return Ok(());
        }
        let t = block[0].len();
        if let Some(bad) = block.iter().position(|r| r.len() != t) {
            return Err(AdamantError::Parse {
                path: path.display().to_string(),
                row: line - block.len() + bad,
                column: block[bad].len().min(t) + 1,
                message: format!("channel has {} samples, expected {t}", block[bad].len()),
            });
        }
        let q = block.len();
        trials.push(DMatrix::from_fn(q, t, |i, j| block[i][j]));
        block.clear();
        Ok(())
    };
    let mut line_no = 0;
    for (i, line) in text.lines().enumerate() {
        line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            flush(&mut block, line_no)?;
            continue;
        }
        block.push(
            line.split(',')
                .enumerate()
                .map(|(j, c)| parse_cell(path, line_no, j + 1, c))
                .collect::<Result<_>>()?,
        );
    }
    flush(&mut block, line_no + 1)?;
    if trials.is_empty() {
        return Err(AdamantError::Input(format!("{}: no trials", path.display())));
    }
    Ok(trials)
}

/// Writes trials in the format read by [`load_trials`].
pub fn write_trials(path: impl AsRef<Path>, trials: &[DMatrix<f64>]) -> Result<()> {
    let blocks: Vec<String> = trials.iter().map(|t| matrix_csv(t, None)).collect();
    write_text(path, &blocks.join("\n"))
}
