// accinterp: run accuracy vs. interpretation-quality experiments from a config file.
//
// Exit codes: 0 ok, 1 other I/O failure, 2 config (including a missing label
// column), 3 data, 4 records.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use accinterp::data::{load_csv, DataError, Dataset};
use accinterp::harness::{
    aggregate_buckets, load_records, run_experiment, write_run, write_summaries,
    AggregateConfig, BucketSummary, ExperimentConfig, HarnessError, RecordError, RunManifest,
    RunOptions, MANIFEST_FILE, RECORDS_FILE,
};
use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

const OUTPUT_ROOT_ENV: &str = "ACCINTERP_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "accinterp", version)]
#[command(about = "Measure how classifier accuracy affects feature-importance stability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset and print its shape and class balance
    Validate {
        /// CSV file; taken from --config when omitted
        dataset: Option<PathBuf>,
        /// Name of the 0/1 label column
        #[arg(long, default_value = "label")]
        label: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an experiment and write records plus summaries
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Worker threads (0 = one per core)
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Exact run directory; must not already hold records
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        root: OutputRoot,
    },
    /// Recompute curves, buckets and histograms from a records file
    Metrics {
        records: PathBuf,
        /// Aggregation settings; defaults to the manifest next to the records
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        root: OutputRoot,
    },
    /// Print bucket summaries for a records file
    Report {
        records: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Replicates per proportion
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated proportion grid, e.g. 0.1,0.5,1.0
    #[arg(long, value_delimiter = ',')]
    proportions: Option<Vec<f64>>,
}

#[derive(Args)]
struct OutputRoot {
    /// Directory under which new run directories are created
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            return match e {
                HarnessError::Config(_) => 2,
                HarnessError::Data(DataError::MissingColumn(_)) => 2,
                HarnessError::Data(_) => 3,
                HarnessError::Records(_) => 4,
                HarnessError::Io(_) | HarnessError::Csv(_) => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<DataError>() {
            return if matches!(e, DataError::MissingColumn(_)) { 2 } else { 3 };
        }
        if cause.downcast_ref::<RecordError>().is_some() {
            return 4;
        }
    }
    1
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate {
            dataset,
            label,
            config,
        } => validate(dataset, label, config),
        Command::Run {
            config,
            overrides,
            jobs,
            out,
            root,
        } => run(&config, overrides, jobs, out, root),
        Command::Metrics {
            records,
            config,
            out,
            root,
        } => metrics(&records, config, out, root),
        Command::Report { records, config } => report(&records, config),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::load(path)?)
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let path = &cfg.dataset.path;
    load_csv(path, &cfg.dataset.label_column)
        .with_context(|| format!("loading {}", path.display()))
}

fn validate(dataset: Option<PathBuf>, label: String, config: Option<PathBuf>) -> Result<()> {
    let (path, label) = match (dataset, config) {
        (Some(p), _) => (p, label),
        (None, Some(c)) => {
            let cfg = load_config(&c)?;
            (cfg.dataset.path, cfg.dataset.label_column)
        }
        (None, None) => {
            return Err(HarnessError::Config("give a dataset path or --config".into()).into())
        }
    };
    let d = load_csv(&path, &label).with_context(|| format!("loading {}", path.display()))?;
    let pos = d.positives();
    let mut out = String::new();
    writeln!(out, "dataset   {}", path.display())?;
    writeln!(out, "rows      {}", d.n_rows())?;
    writeln!(out, "features  {}", d.n_features())?;
    writeln!(
        out,
        "classes   {} positive / {} negative ({:.3} positive)",
        pos,
        d.n_rows() - pos,
        pos as f64 / d.n_rows() as f64
    )?;
    for j in d.constant_columns() {
        writeln!(out, "warning: column `{}` is constant", d.feature_names()[j])?;
    }
    io::stdout().write_all(out.as_bytes())?;
    Ok(())
}

/// `root/<prefix>-<unix seconds>`, suffixed until unused.
fn fresh_dir(root: &Path, prefix: &str) -> PathBuf {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let base = root.join(format!("{prefix}-{secs}"));
    let mut dir = base.clone();
    let mut k = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{k}", base.display()));
        k += 1;
    }
    dir
}

fn run(
    config: &Path,
    overrides: Overrides,
    jobs: usize,
    out: Option<PathBuf>,
    root: OutputRoot,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = overrides.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(n) = overrides.n {
        cfg.experiment.replicates = n;
    }
    if let Some(p) = overrides.proportions {
        cfg.experiment.proportions = p;
    }
    cfg.validate()?;

    let bytes = fs::read(&cfg.dataset.path)
        .map_err(DataError::from)
        .with_context(|| format!("reading {}", cfg.dataset.path.display()))?;
    let data = load_dataset(&cfg)?;
    if let Ok(abs) = cfg.dataset.path.canonicalize() {
        cfg.dataset.path = abs;
    }
    if cfg.dataset.id.is_none() {
        cfg.dataset.id = Some(cfg.dataset_id());
    }

    let dir = match out {
        Some(dir) => {
            if dir.join(RECORDS_FILE).exists() {
                return Err(HarnessError::Config(format!(
                    "{} already holds a run",
                    dir.display()
                ))
                .into());
            }
            dir
        }
        None => {
            let root = cfg
                .experiment
                .output_dir
                .clone()
                .or(root.output_root)
                .unwrap_or_else(|| PathBuf::from("runs"));
            fresh_dir(&root, "run")
        }
    };

    let output = run_experiment(&cfg, &data, &RunOptions { jobs })?;
    let manifest = RunManifest::new(&bytes, data.feature_names(), &output);
    let curves = write_run(&dir, &cfg, &manifest, &output)
        .with_context(|| format!("writing {}", dir.display()))?;

    println!("{} records -> {}", output.records.len(), dir.display());
    if output.n_failed() > 0 {
        eprintln!("warning: {} trials failed and were left out of the summaries", output.n_failed());
    }
    if !curves.dropped.is_empty() {
        eprintln!(
            "warning: {} cells had fewer than 2 successful trials and were dropped",
            curves.dropped.len()
        );
    }
    Ok(())
}

/// Aggregation settings from `--config`, else the run manifest beside the
/// records, else defaults.
fn aggregate_config(records: &Path, config: Option<PathBuf>) -> Result<AggregateConfig> {
    let manifest = records.parent().map(|d| d.join(MANIFEST_FILE));
    match config.or(manifest.filter(|m| m.exists())) {
        Some(path) => Ok(AggregateConfig::from(&load_config(&path)?)),
        None => Ok(AggregateConfig::default()),
    }
}

fn metrics(
    records: &Path,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    root: OutputRoot,
) -> Result<()> {
    let agg = aggregate_config(records, config)?;
    let recs = load_records(records).map_err(HarnessError::from)?;
    let dir = out.unwrap_or_else(|| {
        fresh_dir(
            &root.output_root.unwrap_or_else(|| PathBuf::from("runs")),
            "metrics",
        )
    });
    fs::create_dir_all(&dir)?;
    let curves = write_summaries(&dir, &recs, &agg)?;
    println!(
        "{} records, {} curve rows -> {}",
        recs.len(),
        curves.rows.len(),
        dir.display()
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn bucket_table(rows: &[BucketSummary]) -> String {
    let mut s = format!(
        "{:<14} {:<6} {:<6} {:>5} {:>9} {:>15} {:>7} {:>15}\n",
        "method", "scope", "bucket", "cells", "stability", "band", "pmode", "band"
    );
    let band = |b: Option<accinterp::rankmetrics::PerturbationInterval>| {
        b.map_or_else(|| "-".into(), |b| format!("[{:.3}, {:.3}]", b.lower, b.upper))
    };
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14} {:<6} {:<6} {:>5} {:>9} {:>15} {:>7} {:>15}",
            r.method.id(),
            r.scope.as_str(),
            r.bucket.as_str(),
            r.n_cells,
            fmt_opt(r.mean_stability),
            band(r.stability_band),
            fmt_opt(r.mean_p_mode),
            band(r.p_mode_band),
        );
    }
    s
}

fn report(records: &Path, config: Option<PathBuf>) -> Result<()> {
    let agg = aggregate_config(records, config)?;
    let recs = load_records(records).map_err(HarnessError::from)?;
    let curves = accinterp::harness::aggregate_curves(&recs, &agg);
    let failed = recs.iter().filter(|r| !r.is_ok()).count();
    let mut out = format!(
        "{} records ({} failed), {} cells, {} dropped\n\n",
        recs.len(),
        failed,
        curves.rows.len(),
        curves.dropped.len()
    );
    out.push_str(&bucket_table(&aggregate_buckets(&curves, &agg)));
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<14} {:<6} {:>6} {:>8} {:>9} {:>7}",
        "method", "scope", "p", "mean_f1", "stability", "pmode"
    );
    for r in &curves.rows {
        let _ = writeln!(
            out,
            "{:<14} {:<6} {:>6} {:>8.3} {:>9.3} {:>7.3}",
            r.method.id(),
            r.scope.as_str(),
            r.proportion,
            r.mean_f1,
            r.stability,
            r.p_mode
        );
    }
    io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| anyhow!(e))?;
    Ok(())
}
