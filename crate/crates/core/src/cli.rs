//! Command-line front end. The binary is a thin wrapper around [`main`].

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{
    apply_scaler, fit_scaler, load_csv, load_csv_with_classes, make_toy, write_csv, CsvTable, Dataset, ScalingParams,
    SplitSpec, ToyKind,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_utility, Metric, UtilityReport};
use crate::gdp;
use crate::pipeline::{run_experiment, synthesize_with, ExperimentReport, Method, SynthesisConfig, SynthesisReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  input error (bad flags, unreadable or malformed files, schema mismatch)
  3  infeasible privacy configuration (no noise level or cluster size meets the target)
  4  internal or numerical failure

Set CLUSTMIX_THREADS to cap the number of worker threads.";

#[derive(Debug, Parser)]
#[command(name = "clustmix", version, about = "Differentially private synthetic data by cluster mixing")]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smallest noise for a cluster size, or smallest cluster size for a noise cap.
    Calibrate(CalibrateArgs),
    /// Generate a synthetic CSV from a real one.
    Synthesize(SynthesizeArgs),
    /// Train on real and on synthetic data, score both on a real test set.
    Evaluate(EvaluateArgs),
    /// Split, synthesize and evaluate in one go, over one or more seeds.
    Pipeline(PipelineArgs),
    /// Write a toy dataset.
    Toy(ToyArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: f64,
    /// Cluster size; prints the smallest admissible sigma.
    #[arg(long, conflicts_with = "sigma_max", required_unless_present = "sigma_max")]
    pub l: Option<u64>,
    /// Noise cap; prints the smallest admissible cluster size.
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Number of classes.
    #[arg(long)]
    pub classes: usize,
    /// Number of features.
    #[arg(long)]
    pub features: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub label_column: String,
    /// JSON synthesis configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Replaces the configured grid with this single value.
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Use random mixing instead of cluster mixing.
    #[arg(long)]
    pub baseline: bool,
    /// Print the report to stdout as well.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long)]
    pub label_column: String,
    /// auc, ovo-auc or accuracy.
    #[arg(long, default_value = "accuracy")]
    pub metric: Metric,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub label_column: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated seeds; defaults to the configured seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Also run the random-mixing baseline.
    #[arg(long)]
    pub baseline: bool,
    /// Defaults to auc for two classes and ovo-auc otherwise.
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    /// blobs, moons or skewed-multimodal.
    #[arg(long)]
    pub kind: ToyKind,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// Maps an error to its documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        e if e.is_input_error() => EXIT_INPUT,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => EXIT_INPUT,
        _ => EXIT_INTERNAL,
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("CLUSTMIX_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("CLUSTMIX_THREADS must be a positive integer, got {value:?}")))?;
    // A second call in the same process fails harmlessly.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Synthesize(a) => cmd_synthesize(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
        Command::Toy(a) => cmd_toy(&a),
    }
}

#[derive(Debug, Serialize)]
struct CalibrationOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_min: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_max: Option<f64>,
    epsilon: f64,
    delta: f64,
    #[serde(rename = "C")]
    classes: usize,
    #[serde(rename = "D")]
    features: usize,
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let mut out = CalibrationOutput {
        sigma_min: None,
        l_min: None,
        l: a.l,
        sigma_max: a.sigma_max,
        epsilon: a.epsilon,
        delta: a.delta,
        classes: a.classes,
        features: a.features,
    };
    match (a.l, a.sigma_max) {
        (Some(l), _) => out.sigma_min = Some(gdp::calibrate_sigma(a.epsilon, a.delta, l, a.classes, a.features)?),
        (None, Some(s)) => out.l_min = Some(gdp::min_mixture_size(a.epsilon, a.delta, s, a.classes, a.features)?),
        (None, None) => return Err(Error::InvalidArgument("pass --l or --sigma-max".into())),
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else if let Some(s) = out.sigma_min {
        println!("sigma_min = {s} for l = {}", a.l.unwrap_or_default());
    } else if let Some(l) = out.l_min {
        println!("l_min = {l} for sigma_max = {}", a.sigma_max.unwrap_or_default());
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<SynthesisConfig> {
    match path {
        Some(p) => SynthesisConfig::from_json(&read_text(p)?),
        None => Ok(SynthesisConfig::default()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to reproduce a run; written next to the report.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: SynthesisConfig,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// `report.json` becomes `report.manifest.json`.
pub fn manifest_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.manifest.json"))
}

#[derive(Debug, Serialize)]
struct SynthesizeReport<'a> {
    input: &'a Path,
    label_column: &'a str,
    rows: usize,
    config: &'a SynthesisConfig,
    scaling: &'a ScalingParams,
    output: &'a Path,
    synthesis: &'a SynthesisReport,
}

fn apply_overrides(cfg: &mut SynthesisConfig, seed: Option<u64>, epsilon: Option<f64>, delta: Option<f64>) -> Result<()> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epsilon {
        cfg.privacy.epsilon = e;
    }
    if delta.is_some() {
        cfg.privacy.delta = delta;
    }
    cfg.validate()
}

pub fn cmd_synthesize(a: &SynthesizeArgs) -> Result<()> {
    let started = unix_now();
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.sigma_max {
        cfg.sigma_max_grid = vec![s];
    }
    apply_overrides(&mut cfg, a.seed, a.epsilon, a.delta)?;
    let table = load_csv(&a.input, &a.label_column)?;
    let scaling = fit_scaler(&table.dataset);
    let train = apply_scaler(&table.dataset, &scaling)?;
    let method = if a.baseline { Method::RandomMix } else { Method::ClustMix };
    let synthesis = synthesize_with(&train, &cfg, method)?;
    let synthetic = scaling.inverse(synthesis.synthetic())?;
    write_csv(&a.output, &table, &synthetic)?;
    let report = SynthesizeReport {
        input: &a.input,
        label_column: &a.label_column,
        rows: train.len(),
        config: &cfg,
        scaling: &scaling,
        output: &a.output,
        synthesis: &synthesis,
    };
    write_json(&a.report, &report)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "wrote {} synthetic records to {} (sigma_max {}, l_min {}, delta_max {:e})",
            synthesis.record_count,
            a.output.display(),
            synthesis.sigma_max,
            synthesis.l_min,
            synthesis.realized_privacy.delta_max
        );
    }
    let manifest = RunManifest {
        command: "synthesize".into(),
        seed: cfg.seed,
        config: cfg,
        inputs: vec![FileDigest {
            sha256: file_digest(&a.input)?,
            path: a.input.clone(),
        }],
        artifacts: vec![
            FileDigest {
                sha256: file_digest(&a.output)?,
                path: a.output.clone(),
            },
            FileDigest {
                sha256: file_digest(&a.report)?,
                path: a.report.clone(),
            },
        ],
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_json(&manifest_path(&a.report), &manifest)
}

fn check_same_columns(reference: &CsvTable, other: &CsvTable, path: &Path) -> Result<()> {
    if let Some(missing) = reference.header.iter().find(|c| !other.header.contains(c)) {
        return Err(Error::Schema(format!("{}: column `{missing}` is missing", path.display())));
    }
    if let Some(extra) = other.header.iter().find(|c| !reference.header.contains(c)) {
        return Err(Error::Schema(format!("{}: unexpected column `{extra}`", path.display())));
    }
    if other.header != reference.header {
        return Err(Error::Schema(format!(
            "{}: columns are in a different order than the training file",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluateReport<'a> {
    train: &'a Path,
    test: &'a Path,
    synthetic: &'a Path,
    seed: u64,
    utility: &'a UtilityReport,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let train = load_csv(&a.train, &a.label_column)?;
    let test = load_csv_with_classes(&a.test, &a.label_column, &train.class_names)?;
    let synthetic = load_csv_with_classes(&a.synthetic, &a.label_column, &train.class_names)?;
    check_same_columns(&train, &test, &a.test)?;
    check_same_columns(&train, &synthetic, &a.synthetic)?;
    let scaling = fit_scaler(&train.dataset);
    let scale = |d: &Dataset| apply_scaler(d, &scaling);
    let utility = evaluate_utility(
        &scale(&train.dataset)?,
        &scale(&synthetic.dataset)?,
        &scale(&test.dataset)?,
        a.metric,
        &Default::default(),
        a.seed,
    )?;
    let report = EvaluateReport {
        train: &a.train,
        test: &a.test,
        synthetic: &a.synthetic,
        seed: a.seed,
        utility: &utility,
    };
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{}: real {:.4}, synthetic {:.4}, gap {:+.4}",
            utility.metric, utility.real_score, utility.synthetic_score, utility.gap
        );
        for d in &utility.diagnostics {
            println!("note: {d}");
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_real_score: f64,
    pub mean_synthetic_score: f64,
    pub mean_gap: f64,
    pub mean_records: f64,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize)]
pub struct PipelineReport {
    pub input: PathBuf,
    pub label_column: String,
    pub metric: Metric,
    pub config: SynthesisConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<ExperimentReport>,
    pub summary: Vec<MethodSummary>,
}

/// Runs split, synthesis and evaluation for each seed and summarizes the
/// per-method means.
pub fn run_pipeline(
    data: &Dataset,
    cfg: &SynthesisConfig,
    seeds: &[u64],
    test_fraction: f64,
    metric: Metric,
    methods: &[Method],
) -> Result<(Vec<ExperimentReport>, Vec<MethodSummary>)> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = SynthesisConfig {
            seed,
            ..cfg.clone()
        };
        runs.push(run_experiment(
            data,
            &cfg,
            SplitSpec { test_fraction, seed },
            metric,
            methods,
        )?);
    }
    let n = runs.len() as f64;
    let summary = methods
        .iter()
        .map(|&m| {
            let results: Vec<_> = runs.iter().filter_map(|r| r.result(m)).collect();
            let mean = |f: &dyn Fn(&crate::pipeline::MethodResult) -> f64| results.iter().map(|r| f(r)).sum::<f64>() / n;
            MethodSummary {
                method: m,
                mean_real_score: mean(&|r| r.utility.real_score),
                mean_synthetic_score: mean(&|r| r.utility.synthetic_score),
                mean_gap: mean(&|r| r.utility.gap),
                mean_records: mean(&|r| r.synthesis.record_count as f64),
                epsilon: cfg.privacy.epsilon,
                delta: results.first().map_or(f64::NAN, |r| r.synthesis.realized_privacy.delta_target),
            }
        })
        .collect();
    Ok((runs, summary))
}

pub fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    apply_overrides(&mut cfg, None, a.epsilon, a.delta)?;
    let table = load_csv(&a.input, &a.label_column)?;
    let metric = a.metric.unwrap_or(if table.dataset.class_count() == 2 {
        Metric::Auc
    } else {
        Metric::OvoAuc
    });
    let seeds = if a.seeds.is_empty() { vec![cfg.seed] } else { a.seeds.clone() };
    let methods: &[Method] = if a.baseline {
        &[Method::ClustMix, Method::RandomMix]
    } else {
        &[Method::ClustMix]
    };
    let (runs, summary) = run_pipeline(&table.dataset, &cfg, &seeds, a.test_fraction, metric, methods)?;
    let report = PipelineReport {
        input: a.input.clone(),
        label_column: a.label_column.clone(),
        metric,
        config: cfg,
        seeds,
        runs,
        summary,
    };
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for s in &report.summary {
            println!(
                "{:<10} {metric} real {:.4} synthetic {:.4} gap {:+.4} records {:.1} (epsilon {}, delta {:e})",
                s.method.name(),
                s.mean_real_score,
                s.mean_synthetic_score,
                s.mean_gap,
                s.mean_records,
                s.epsilon,
                s.delta
            );
        }
    }
    Ok(())
}

pub fn cmd_toy(a: &ToyArgs) -> Result<()> {
    let d = make_toy(&a.kind, a.n, a.seed)?;
    let schema = CsvTable {
        header: vec!["x0".into(), "x1".into(), "label".into()],
        label_index: 2,
        class_names: (0..d.class_count()).map(|c| c.to_string()).collect(),
        dataset: d.clone(),
    };
    write_csv(&a.output, &schema, &d)?;
    println!("wrote {} {} rows to {}", d.len(), a.kind, a.output.display());
    Ok(())
}
