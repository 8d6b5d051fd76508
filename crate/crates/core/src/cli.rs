//! Command-line front end: `simulate`, `explain` and `cv`.
//!
//! Every run writes `manifest.json` recording the resolved parameters, input
//! hashes and the selected indices, so a run can be replayed with [`replay`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::explain::{self, ExplanationReport};
use crate::hyper::{self, CvConfig, CvResult};
use crate::kernels::{KernelConfig, KernelFamily};
use crate::omp::{OmpConfig, StopReason, TieBreak, SELECTION_RULE};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "obs-explain", version, about = "Observation-specific explanations via greedy kernel surrogates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario, fit the surrogate and write reports.
    Simulate(SimulateArgs),
    /// Explain the predictions stored in a CSV file.
    Explain(ExplainArgs),
    /// Cross-validate the kernel length scale on a CSV file.
    Cv(CvArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Quadratic,
    Ackley,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Quadratic => "quadratic",
            Scenario::Ackley => "ackley",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Kernel family: gaussian, matern32 or exponential.
    #[arg(long, default_value = "gaussian", value_parser = parse_family)]
    pub kernel: KernelFamily,
    /// Stopping tolerance on the maximum absolute residual.
    #[arg(long, default_value = "1e-3", value_parser = parse_scalar)]
    pub epsilon: f64,
    /// Cap on the number of selected points.
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Length scale; accepts `sqrt(7)` style expressions.
    #[arg(long, default_value = "1", value_parser = parse_scalar)]
    pub length_scale: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Comma-separated file with a header row.
    pub csv: PathBuf,
    /// Column holding the black-box predictions.
    #[arg(long)]
    pub target: String,
    /// Comma-separated feature columns (default: every other numeric column).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "1", value_parser = parse_scalar)]
    pub length_scale: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Candidate length scales: `a,b,c` or `log:LO:HI:COUNT`
    /// (default: 25 log-spaced values from 1e-4 to 1e2).
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    #[arg(long, default_value_t = 5)]
    pub k_folds: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_family(s: &str) -> std::result::Result<KernelFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A decimal number or `sqrt(<number>)`.
pub fn parse_scalar(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let value = match t
        .strip_prefix("sqrt(")
        .and_then(|rest| rest.strip_suffix(')'))
    {
        Some(inner) => inner
            .trim()
            .parse::<f64>()
            .map(f64::sqrt)
            .map_err(|e| format!("'{s}': {e}"))?,
        None => t.parse::<f64>().map_err(|e| format!("'{s}': {e}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{s}' is not a finite number"))
    }
}

pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    if let Some(spec) = s.trim().strip_prefix("log:") {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(format!("'{s}': expected log:LO:HI:COUNT"));
        };
        let (lo, hi) = (parse_scalar(lo)?, parse_scalar(hi)?);
        let count: usize = count.trim().parse().map_err(|e| format!("'{s}': {e}"))?;
        if !(lo > 0.0 && hi >= lo && count >= 1) {
            return Err(format!("'{s}': need 0 < LO <= HI and COUNT >= 1"));
        }
        return Ok(Grid(hyper::log_grid(lo, hi, count)));
    }
    s.split(',')
        .map(parse_scalar)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Grid)
}

/// Parameters and outcome of one run, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    pub kernel: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<f64>,
    pub epsilon: f64,
    pub max_points: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    pub selection_rule: String,
    pub tie_break: TieBreak,
    pub input_hashes: BTreeMap<String, String>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_selected: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_length_scale: Option<f64>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub report: Option<ExplanationReport>,
    pub cv: Option<CvResult>,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Degenerate(_) | Error::RepresentationMismatch { .. } => EXIT_DEGENERATE,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Explain(args) => explain_csv(args),
        Command::Cv(args) => cross_validate(args),
    }
}

fn omp_config(common: &CommonArgs) -> OmpConfig {
    OmpConfig {
        tolerance: common.epsilon,
        max_points: common.max_points,
        tie_break: TieBreak::LowestIndex,
    }
}

fn base_manifest(command: &str, kernel: KernelFamily, common: &CommonArgs) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        scenario: None,
        input: None,
        target_column: None,
        features: None,
        kernel,
        length_scale: None,
        epsilon: common.epsilon,
        max_points: common.max_points,
        seed: common.seed,
        sample_size: None,
        k_folds: None,
        grid: None,
        selection_rule: SELECTION_RULE.to_string(),
        tie_break: TieBreak::LowestIndex,
        input_hashes: BTreeMap::new(),
        n: 0,
        n_selected: None,
        max_residual: None,
        stop_reason: None,
        selected_indices: Vec::new(),
        best_length_scale: None,
        wall_time_s: 0.0,
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn load_input(input: &InputArgs, manifest: &mut RunManifest) -> Result<Dataset> {
    let ds = data::load_csv(&input.csv, &input.target, input.features.as_deref())?;
    manifest.input = Some(input.csv.clone());
    manifest.target_column = Some(input.target.clone());
    manifest.features = input.features.clone();
    manifest
        .input_hashes
        .insert(input.csv.display().to_string(), sha256_file(&input.csv)?);
    data::standardize(&ds)
}

fn simulate(args: &SimulateArgs) -> Result<Outcome> {
    let start = Instant::now();
    let common = &args.common;
    let ds = match args.scenario {
        Scenario::Quadratic => data::gen_quadratic(args.n, common.seed)?,
        Scenario::Ackley => data::gen_ackley(args.n, common.seed)?,
    };
    let mut manifest = base_manifest("simulate", common.kernel, common);
    manifest.scenario = Some(args.scenario);
    manifest.sample_size = Some(args.n);
    let title = format!("simulate {}", args.scenario.name());
    fit_and_write(
        &ds,
        args.scenario.name(),
        &title,
        args.length_scale,
        common,
        manifest,
        start,
    )
}

fn explain_csv(args: &ExplainArgs) -> Result<Outcome> {
    let start = Instant::now();
    let common = &args.common;
    let mut manifest = base_manifest("explain", common.kernel, common);
    let ds = load_input(&args.input, &mut manifest)?;
    let name = args
        .input
        .csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let title = format!("explain {}", args.input.csv.display());
    fit_and_write(&ds, &name, &title, args.length_scale, common, manifest, start)
}

fn fit_and_write(
    ds: &Dataset,
    name: &str,
    title: &str,
    length_scale: f64,
    common: &CommonArgs,
    mut manifest: RunManifest,
    start: Instant,
) -> Result<Outcome> {
    let kernel = KernelConfig::new(common.kernel, length_scale)?;
    let cfg = omp_config(common);
    let (model, report) = explain::explain(&ds.points, &ds.targets, kernel, &cfg)?;

    let out = &common.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let report_path = out.join("report.csv");
    write_report(&report, &report_path)?;
    let tables = data::write_tables(&report, ds, name, out)?;

    manifest.length_scale = Some(length_scale);
    manifest.n = ds.len();
    manifest.n_selected = Some(report.n_selected);
    manifest.max_residual = Some(model.newton().max_residual());
    manifest.stop_reason = Some(report.metadata.stop_reason);
    manifest.selected_indices = report.selected_indices.clone();
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    let manifest_path = out.join("manifest.json");
    write_manifest(&manifest, &manifest_path)?;

    let summary = fit_summary(title, ds, &report, &manifest);
    let summary_path = out.join("summary.txt");
    fs::write(&summary_path, &summary).map_err(|e| Error::io(&summary_path, e))?;

    Ok(Outcome {
        manifest,
        report: Some(report),
        cv: None,
        files: vec![
            report_path,
            tables.full,
            tables.explanations,
            manifest_path,
            summary_path,
        ],
        summary,
    })
}

fn cross_validate(args: &CvArgs) -> Result<Outcome> {
    let start = Instant::now();
    let common = &args.common;
    let mut manifest = base_manifest("cv", common.kernel, common);
    let ds = load_input(&args.input, &mut manifest)?;
    let cfg = CvConfig {
        k_folds: args.k_folds,
        grid: args
            .grid
            .clone()
            .map_or_else(|| CvConfig::default().grid, |g| g.0),
        shuffle_seed: common.seed,
    };
    let result = hyper::cv_select(&ds.points, &ds.targets, common.kernel, &cfg, &omp_config(common))?;

    let out = &common.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let curve_path = out.join("cv.csv");
    write_curve(&result, &curve_path)?;

    manifest.n = ds.len();
    manifest.k_folds = Some(cfg.k_folds);
    manifest.grid = Some(cfg.grid.clone());
    manifest.best_length_scale = Some(result.best_length_scale);
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    let manifest_path = out.join("manifest.json");
    write_manifest(&manifest, &manifest_path)?;

    let summary = format!(
        "best length scale {}\nmin CV error {:e}\n",
        result.best_length_scale, result.best_error
    );
    Ok(Outcome {
        manifest,
        report: None,
        cv: Some(result),
        files: vec![curve_path, manifest_path],
        summary,
    })
}

/// Re-runs the command described by a manifest, writing into `out_dir`.
pub fn replay(manifest: &RunManifest, out_dir: impl Into<PathBuf>) -> Result<Outcome> {
    let common = CommonArgs {
        kernel: manifest.kernel,
        epsilon: manifest.epsilon,
        max_points: manifest.max_points,
        seed: manifest.seed,
        out_dir: out_dir.into(),
    };
    let input = || -> Result<InputArgs> {
        let csv = manifest
            .input
            .clone()
            .ok_or_else(|| Error::input("manifest has no input file"))?;
        if let Some(expected) = manifest.input_hashes.get(&csv.display().to_string()) {
            if &sha256_file(&csv)? != expected {
                return Err(Error::input(format!(
                    "{} changed since the manifest was written",
                    csv.display()
                )));
            }
        }
        Ok(InputArgs {
            csv,
            target: manifest
                .target_column
                .clone()
                .ok_or_else(|| Error::input("manifest has no target column"))?,
            features: manifest.features.clone(),
        })
    };
    let length_scale = || {
        manifest
            .length_scale
            .ok_or_else(|| Error::input("manifest has no length scale"))
    };
    let command = match manifest.command.as_str() {
        "simulate" => Command::Simulate(SimulateArgs {
            scenario: manifest
                .scenario
                .ok_or_else(|| Error::input("manifest has no scenario"))?,
            n: manifest.sample_size.unwrap_or(manifest.n),
            length_scale: length_scale()?,
            common,
        }),
        "explain" => Command::Explain(ExplainArgs {
            input: input()?,
            length_scale: length_scale()?,
            common,
        }),
        "cv" => Command::Cv(CvArgs {
            input: input()?,
            grid: manifest.grid.clone().map(Grid),
            k_folds: manifest.k_folds.unwrap_or(5),
            common,
        }),
        other => return Err(Error::input(format!("unknown command '{other}' in manifest"))),
    };
    run(&command)
}

fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// `report.csv`: one row per observation.
pub fn write_report(report: &ExplanationReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record([
        "index",
        "gamma",
        "error",
        "normalized_error",
        "selected",
        "coefficient",
    ])
    .map_err(csv_error(path))?;
    for i in 0..report.n() {
        w.write_record([
            i.to_string(),
            report.gamma[i].to_string(),
            report.errors[i].to_string(),
            report.normalized_errors[i].to_string(),
            u8::from(report.is_selected(i)).to_string(),
            report.kernel_coeffs[i].to_string(),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_curve(result: &CvResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(["length_scale", "cv_error"]).map_err(csv_error(path))?;
    for p in &result.curve {
        let err = p.error.map_or_else(|| "NaN".to_string(), |e| e.to_string());
        w.write_record([p.length_scale.to_string(), err])
            .map_err(csv_error(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fit_summary(title: &str, ds: &Dataset, report: &ExplanationReport, manifest: &RunManifest) -> String {
    let n = ds.len();
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(
        s,
        "n = {n}, n* = {} ({:.1}% of the data size)",
        report.n_selected,
        100.0 * report.n_selected as f64 / n as f64
    );
    let _ = writeln!(
        s,
        "kernel {} (length scale {}), epsilon {:e}, stop: {:?}",
        report.metadata.kernel, report.metadata.length_scale, report.metadata.tolerance, report.metadata.stop_reason
    );
    let _ = writeln!(s, "max residual {:e}", manifest.max_residual.unwrap_or(0.0));
    if report.degenerate {
        let _ = writeln!(s, "all kernel coefficients are zero; explanations set to 0");
    }
    let top: Vec<String> = report
        .ranking()
        .into_iter()
        .take(10.min(report.n_selected))
        .map(|i| format!("{i}: {:.4}", report.gamma[i]))
        .collect();
    let _ = writeln!(s, "top explanations (index: gamma): {}", top.join(", "));
    s
}
