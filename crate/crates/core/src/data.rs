//! Datasets: CSV ingestion, standardization, the two synthetic scenarios and
//! the whitespace-delimited plot tables.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::ExplanationReport;
use crate::points::PointSet;

/// Mean and population standard deviation of one feature column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: PointSet,
    /// Black-box predictions `f(x_i)`.
    pub targets: Vec<f64>,
    pub column_names: Vec<String>,
    /// Present once `standardize` has been applied.
    pub standardization: Option<Vec<ColumnScaling>>,
    /// Rows discarded during ingestion.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn new(points: PointSet, targets: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("dataset has no rows"));
        }
        if points.len() != targets.len() {
            return Err(Error::input(format!(
                "{} targets for {} points",
                targets.len(),
                points.len()
            )));
        }
        if column_names.len() != points.dim() {
            return Err(Error::input(format!(
                "{} column names for {} features",
                column_names.len(),
                points.dim()
            )));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        Ok(Self {
            points,
            targets,
            column_names,
            standardization: None,
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Row `i` in the original (pre-standardization) units.
    pub fn original_row(&self, i: usize) -> Vec<f64> {
        let row = self.points.row(i);
        match &self.standardization {
            None => row.to_vec(),
            Some(scales) => row
                .iter()
                .zip(scales)
                .map(|(v, s)| v * s.std_dev + s.mean)
                .collect(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL")
}

fn parse_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if is_missing(cell) {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a comma-separated file with a header row.
///
/// Numeric columns other than `target_column` become features, unless
/// `features` names them explicitly. A column counts as numeric when at
/// least half of its non-missing cells parse. Rows with a missing or
/// unparseable value in a used column are dropped; more than half dropped
/// is an error.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    features: Option<&[String]>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;

    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| {
            Error::input(format!(
                "target column '{target_column}' not found in {}",
                path.display()
            ))
        })?;

    let numeric = |col: usize| {
        let (mut ok, mut present) = (0usize, 0usize);
        for rec in &records {
            let cell = rec.get(col).unwrap_or("").trim();
            if !is_missing(cell) {
                present += 1;
                ok += usize::from(parse_cell(cell).is_some());
            }
        }
        present > 0 && 2 * ok >= present
    };

    if !numeric(target_idx) {
        return Err(Error::input(format!(
            "target column '{target_column}' is not numeric"
        )));
    }

    let feature_idx: Vec<usize> = match features {
        Some(names) => {
            let mut seen = HashSet::new();
            names
                .iter()
                .map(|name| {
                    let idx = headers.iter().position(|h| h == name).ok_or_else(|| {
                        Error::input(format!("feature column '{name}' not found"))
                    })?;
                    if idx == target_idx || !seen.insert(idx) {
                        return Err(Error::input(format!("feature column '{name}' repeated")));
                    }
                    if !numeric(idx) {
                        return Err(Error::input(format!("feature column '{name}' is not numeric")));
                    }
                    Ok(idx)
                })
                .collect::<Result<_>>()?
        }
        None => (0..headers.len())
            .filter(|&c| c != target_idx)
            .filter(|&c| {
                let keep = numeric(c);
                if !keep {
                    warn!("dropping non-numeric column '{}'", headers[c]);
                }
                keep
            })
            .collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::input("no numeric feature columns"));
    }

    let mut data = Vec::with_capacity(records.len() * feature_idx.len());
    let mut targets = Vec::with_capacity(records.len());
    let mut dropped = 0usize;
    'rows: for rec in &records {
        let mut row = Vec::with_capacity(feature_idx.len());
        for &c in &feature_idx {
            match rec.get(c).and_then(parse_cell) {
                Some(v) => row.push(v),
                None => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        let Some(t) = rec.get(target_idx).and_then(parse_cell) else {
            dropped += 1;
            continue;
        };
        data.extend(row);
        targets.push(t);
    }

    if targets.is_empty() {
        return Err(Error::input(format!("{}: no usable rows", path.display())));
    }
    if 2 * dropped > records.len() {
        return Err(Error::input(format!(
            "{}: {dropped} of {} rows unusable",
            path.display(),
            records.len()
        )));
    }
    if dropped > 0 {
        warn!("dropped {dropped} rows with missing or unparseable values");
    }

    let names = feature_idx.iter().map(|&c| headers[c].clone()).collect();
    let points = PointSet::from_flat(feature_idx.len(), data)?;
    let mut ds = Dataset::new(points, targets, names)?;
    ds.dropped_rows = dropped;
    Ok(ds)
}

/// Centers every feature column and scales it to unit population variance.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let n = ds.len() as f64;
    let p = ds.dim();
    let mut scales = Vec::with_capacity(p);
    for c in 0..p {
        let mean = ds.points.rows().map(|r| r[c]).sum::<f64>() / n;
        let var = ds.points.rows().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        let std_dev = var.sqrt();
        if std_dev <= 1e-12 * mean.abs().max(1.0) {
            return Err(Error::Degenerate(format!(
                "feature column '{}' is constant",
                ds.column_names[c]
            )));
        }
        scales.push(ColumnScaling { mean, std_dev });
    }
    let data = ds
        .points
        .rows()
        .flat_map(|r| r.iter().zip(&scales).map(|(v, s)| (v - s.mean) / s.std_dev))
        .collect();

    // compose with an earlier transform so original_row stays correct
    let composed = match &ds.standardization {
        None => scales,
        Some(prev) => prev
            .iter()
            .zip(&scales)
            .map(|(a, b)| ColumnScaling {
                mean: a.mean + a.std_dev * b.mean,
                std_dev: a.std_dev * b.std_dev,
            })
            .collect(),
    };
    Ok(Dataset {
        points: PointSet::from_flat(p, data)?,
        targets: ds.targets.clone(),
        column_names: ds.column_names.clone(),
        standardization: Some(composed),
        dropped_rows: ds.dropped_rows,
    })
}

pub fn quadratic(x1: f64, x2: f64) -> f64 {
    x1 * x1 + x2 * x2 + 1.0
}

/// Ackley function with `a = 20`, `b = 0.2`, `c = 2π`.
pub fn ackley(x1: f64, x2: f64) -> f64 {
    use std::f64::consts::{E, TAU};
    -20.0 * (-0.2 * (0.5 * (x1 * x1 + x2 * x2)).sqrt()).exp()
        - (0.5 * ((TAU * x1).cos() + (TAU * x2).cos())).exp()
        + 20.0
        + E
}

fn gen_scenario(n: usize, seed: u64, f: fn(f64, f64) -> f64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.sample(StandardNormal);
        let x2: f64 = rng.sample(StandardNormal);
        data.extend([x1, x2]);
        targets.push(f(x1, x2));
    }
    Dataset::new(
        PointSet::from_flat(2, data)?,
        targets,
        vec!["X1".into(), "X2".into()],
    )
}

/// `n` standard-normal points in ℝ² with target `x₁² + x₂² + 1`.
pub fn gen_quadratic(n: usize, seed: u64) -> Result<Dataset> {
    gen_scenario(n, seed, quadratic)
}

/// `n` standard-normal points in ℝ² with the Ackley function as target.
pub fn gen_ackley(n: usize, seed: u64) -> Result<Dataset> {
    gen_scenario(n, seed, ackley)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TablePaths {
    pub full: PathBuf,
    pub explanations: PathBuf,
}

fn fmt_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes `<name>_full.txt` (every row, with absolute error) and
/// `<name>_expl.txt` (selected rows, with `γ`). Feature columns are written
/// in original units.
pub fn write_tables(
    report: &ExplanationReport,
    ds: &Dataset,
    name: &str,
    out_dir: impl AsRef<Path>,
) -> Result<TablePaths> {
    if report.n() != ds.len() {
        return Err(Error::input(format!(
            "report covers {} observations, dataset has {}",
            report.n(),
            ds.len()
        )));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let header = |last: &str| {
        let mut cols = ds.column_names.clone();
        cols.extend(["Y_pred".to_string(), last.to_string()]);
        cols.join(" ")
    };

    let full = out_dir.join(format!("{name}_full.txt"));
    write_table(&full, &header("Abs_err"), (0..ds.len()).map(|i| {
        let mut row = ds.original_row(i);
        row.extend([ds.targets[i], report.errors[i]]);
        row
    }))?;

    let expl = out_dir.join(format!("{name}_expl.txt"));
    let mut selected = report.selected_indices.clone();
    selected.sort_unstable();
    write_table(&expl, &header("Gamma"), selected.into_iter().map(|i| {
        let mut row = ds.original_row(i);
        row.extend([ds.targets[i], report.gamma[i]]);
        row
    }))?;

    Ok(TablePaths {
        full,
        explanations: expl,
    })
}

fn write_table(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}").map_err(io_err)?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_value).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a table written by `write_tables`: header names and numeric rows.
pub fn read_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::input(format!("{}: empty table", path.display())))?
        .split_whitespace()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::input(format!("{}: bad value '{v}'", path.display())))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}
