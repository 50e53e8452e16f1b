//! Command-line front end. [`run`] maps an argument vector to an exit code:
//! 0 success, 1 usage error, 2 data or validation error, 3 runtime failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use crate::diagnostics::Bandwidth;
use crate::error::{Error, Result};
use crate::features::{compute_features, features_to_table, FeatureOptions, FeatureTable};
use crate::ingest::{fetch_project, FetchOptions};
use crate::ingest::{load_archive, rfc3339};
use crate::learners::ModelDocument;
use crate::pipeline::{classify_table, run_diagnostics, run_training, RunConfig, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "oss-lifecycle", version, about = "Project health features and lifecycle stage classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download one repository's events from a REST API into an archive directory
    Fetch(FetchArgs),
    /// Load and validate an archive, writing the normalized event log as JSON
    Ingest(IngestArgs),
    /// Compute the feature table for every archive in a corpus directory
    Features(FeaturesArgs),
    /// Run the full training pipeline and write all artifacts
    Train(TrainArgs),
    /// Predict lifecycle stages with a trained model
    Classify(ClassifyArgs),
    /// Print the summary of a finished training run
    Report(ReportArgs),
    /// Exploratory statistics and ridgeline densities for a labeled table
    Diagnose(DiagnoseArgs),
}

fn parse_time(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    rfc3339::parse(s).map_err(|e| format!("expected an RFC 3339 timestamp: {e}"))
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// API root, e.g. https://api.github.com
    #[arg(long)]
    pub base_url: String,
    /// Repository slug `owner/name`
    #[arg(long)]
    pub repo: String,
    /// Name of the environment variable holding the API token
    #[arg(long, default_value = "GITHUB_TOKEN")]
    pub token_env: String,
    /// Archive directory to create
    #[arg(long)]
    pub out: PathBuf,
    /// Drop events after this instant
    #[arg(long, value_parser = parse_time, default_value = "2023-12-31T23:59:59Z")]
    pub window_end: DateTime<Utc>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Archive directory
    #[arg(long)]
    pub archive: PathBuf,
    /// Output JSON file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Truncate the log at this instant
    #[arg(long, value_parser = parse_time)]
    pub window_end: Option<DateTime<Utc>>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Directory whose subdirectories are archives; an optional labels.csv
    /// (`repo_id,label`) at its root is joined onto the table
    #[arg(long)]
    pub corpus: PathBuf,
    /// Truncate every log at this instant; each archive's own window end otherwise
    #[arg(long, value_parser = parse_time)]
    pub window_end: Option<DateTime<Utc>>,
    /// Look-back window for new contributors, in days
    #[arg(long, default_value_t = 365)]
    pub recency_days: i64,
    /// Output CSV; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run configuration; flags below override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Feature table CSV
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Two-column `repo_id,label` CSV joined onto the feature table
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Artifact directory [default: run]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed for every stochastic stage [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Outlier fractions `graduated=F,incubating=F,sandbox=F` or one value for
    /// all classes [default: graduated=0.01,incubating=0.05,sandbox=0.10]
    #[arg(long)]
    pub contamination: Option<String>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// model.json written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Feature table CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Output CSV; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// manifest.json written by `train`
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Feature table CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Two-column `repo_id,label` CSV joined onto the feature table
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Trained model; adds partial dependence curves
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fixed KDE bandwidth; Silverman's rule when omitted
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_RUNTIME
            }
        }
        Err(_) => EXIT_RUNTIME,
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fetch(a) => fetch(a),
        Command::Ingest(a) => ingest(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::Report(a) => report(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn fetch(a: FetchArgs) -> Result<()> {
    let token = std::env::var(&a.token_env)
        .map_err(|_| Error::Config(format!("environment variable {} is not set", a.token_env)))?;
    let log = fetch_project(&a.base_url, &a.repo, &token, a.window_end, &a.out, &FetchOptions::default())?;
    eprintln!(
        "fetched {}: {} commits, {} pull requests, {} issues",
        log.repo_id,
        log.commits.len(),
        log.pull_requests.len(),
        log.issues.len()
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut log = load_archive(&a.archive)?;
    if let Some(t) = a.window_end {
        log = log.with_window_end(t);
    }
    let mut body = serde_json::to_string_pretty(&log)?;
    body.push('\n');
    emit(a.out.as_deref(), &body)
}

/// Feature table for every archive under `corpus`, ordered by directory name.
pub fn corpus_table(corpus: &Path, window_end: Option<DateTime<Utc>>, opts: &FeatureOptions) -> Result<FeatureTable> {
    let entries = fs::read_dir(corpus).map_err(|e| Error::io(corpus, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let rows = dirs
        .iter()
        .map(|d| {
            let mut log = load_archive(d)?;
            if let Some(t) = window_end {
                log = log.with_window_end(t);
            }
            compute_features(&log, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = features_to_table(&rows)?;
    let labels = corpus.join("labels.csv");
    if labels.is_file() {
        let f = fs::File::open(&labels).map_err(|e| Error::io(&labels, e))?;
        table.attach_labels(f)?;
    }
    Ok(table)
}

fn features(a: FeaturesArgs) -> Result<()> {
    let opts = FeatureOptions {
        recency_days: a.recency_days,
        ..FeatureOptions::default()
    };
    let table = corpus_table(&a.corpus, a.window_end, &opts)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&buf))?;
    eprintln!("{} repositories", table.len());
    Ok(())
}

fn load_table(features: &Path, labels: Option<&Path>) -> Result<FeatureTable> {
    let mut table = FeatureTable::read_path(features)?;
    if let Some(l) = labels {
        let f = fs::File::open(l).map_err(|e| Error::io(l, e))?;
        table.attach_labels(f)?;
    }
    Ok(table)
}

/// Applies a `--contamination` value to the configuration.
pub fn apply_contamination(cfg: &mut RunConfig, spec: &str) -> Result<()> {
    let bad = || Error::Config(format!("cannot parse contamination `{spec}`"));
    if let Ok(v) = spec.trim().parse::<f64>() {
        cfg.contamination_graduated = v;
        cfg.contamination_incubating = v;
        cfg.contamination_sandbox = v;
        return Ok(());
    }
    for part in spec.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        match k.trim().parse::<crate::features::LifecycleStage>()? {
            crate::features::LifecycleStage::Graduated => cfg.contamination_graduated = v,
            crate::features::LifecycleStage::Incubating => cfg.contamination_incubating = v,
            crate::features::LifecycleStage::Sandbox => cfg.contamination_sandbox = v,
        }
    }
    Ok(())
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(f)
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    // relative paths in the config file resolve against its directory
    let base = a
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(c) = &a.contamination {
        apply_contamination(&mut cfg, c)?;
    }
    let features = a
        .features
        .clone()
        .or_else(|| cfg.features.as_ref().map(resolve))
        .ok_or_else(|| Error::Config("no feature table: pass --features or set `features` in the config".into()))?;
    let labels = a.labels.clone().or_else(|| cfg.labels.as_ref().map(resolve));
    let out_dir = a
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(resolve))
        .unwrap_or_else(|| PathBuf::from("run"));
    cfg.features = Some(features.clone());
    cfg.labels = labels.clone();
    cfg.out_dir = Some(out_dir.clone());
    cfg.validate()?;

    let table = load_table(&features, labels.as_deref())?;
    let manifest = with_jobs(a.jobs, || run_training(&cfg, &table, &out_dir))?;
    eprintln!(
        "chosen {} with {} features; test accuracy {:.4}; artifacts in {}",
        manifest.chosen_family,
        manifest.selected_features.len(),
        manifest.report.accuracy,
        out_dir.display()
    );
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let doc = ModelDocument::load(&a.model)?;
    let table = FeatureTable::read_path(&a.features)?;
    let result = classify_table(&doc, &table)?;
    if !result.ignored_columns.is_empty() {
        eprintln!("note: ignoring columns not used by the model: {}", result.ignored_columns.join(", "));
    }
    emit(a.out.as_deref(), &result.to_csv(doc.payload.classes()))
}

fn report(a: ReportArgs) -> Result<()> {
    let manifest = RunManifest::load(&a.manifest)?;
    emit(None, &manifest.render())
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let table = load_table(&a.features, a.labels.as_deref())?;
    let model = a.model.as_ref().map(ModelDocument::load).transpose()?;
    let bw = match a.bandwidth {
        Some(h) if h > 0.0 => Bandwidth::Fixed(h),
        Some(h) => return Err(Error::Config(format!("bandwidth must be positive, got {h}"))),
        None => Bandwidth::Silverman,
    };
    let summary = run_diagnostics(&table, model.as_ref(), bw, &a.out_dir)?;
    eprintln!(
        "{} features summarized; outputs in {}",
        summary.features.len(),
        a.out_dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["oss-lifecycle", "train", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["oss-lifecycle"]), EXIT_USAGE);
        assert_eq!(run(["oss-lifecycle", "--help"]), EXIT_OK);
    }

    #[test]
    fn contamination_flag() {
        let mut cfg = RunConfig::default();
        apply_contamination(&mut cfg, "grads=0.02,sandbox=0.2").unwrap();
        assert_eq!((cfg.contamination_graduated, cfg.contamination_incubating, cfg.contamination_sandbox), (0.02, 0.05, 0.2));
        apply_contamination(&mut cfg, "0").unwrap();
        assert_eq!(cfg.contamination_sandbox, 0.0);
        assert!(apply_contamination(&mut cfg, "x=1").is_err());
    }
}
