use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    read_records, write_records, BucketSummary, CurveRow, ExperimentConfig, HarnessError,
    HistogramRow, RecordError, RunOutput, TrialRecord,
};
use crate::rankmetrics::PerturbationInterval;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const CURVES_FILE: &str = "curves.csv";
pub const BUCKETS_FILE: &str = "buckets.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<(), HarnessError> {
    w.into_inner()
        .map_err(|e| HarnessError::Io(e.into_error()))?
        .flush()?;
    Ok(())
}

pub fn write_curves<W: Write>(out: W, rows: &[CurveRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(out);
    w.write_record([
        "dataset", "method", "scope", "proportion", "n_valid", "n_failed", "mean_f1", "f1_lower",
        "f1_upper", "stability", "stability_lower", "stability_upper", "p_mode",
    ])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.scope.to_string(),
            r.proportion.to_string(),
            r.n_valid.to_string(),
            r.n_failed.to_string(),
            r.mean_f1.to_string(),
            r.f1.lower.to_string(),
            r.f1.upper.to_string(),
            r.stability.to_string(),
            r.stability_band.lower.to_string(),
            r.stability_band.upper.to_string(),
            r.p_mode.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_buckets<W: Write>(out: W, rows: &[BucketSummary]) -> Result<(), HarnessError> {
    let mut w = csv_writer(out);
    w.write_record([
        "method", "scope", "bucket", "n_cells", "mean_stability", "stability_lower",
        "stability_upper", "mean_p_mode", "p_mode_lower", "p_mode_upper",
    ])?;
    let lo = |b: &Option<PerturbationInterval>| opt(b.map(|b| b.lower));
    let hi = |b: &Option<PerturbationInterval>| opt(b.map(|b| b.upper));
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.scope.to_string(),
            r.bucket.to_string(),
            r.n_cells.to_string(),
            opt(r.mean_stability),
            lo(&r.stability_band),
            hi(&r.stability_band),
            opt(r.mean_p_mode),
            lo(&r.p_mode_band),
            hi(&r.p_mode_band),
        ])?;
    }
    finish(w)
}

pub fn write_histograms<W: Write>(out: W, rows: &[HistogramRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(out);
    w.write_record([
        "method", "scope", "bucket", "bin", "lower", "upper", "mass", "n_cells",
    ])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.scope.to_string(),
            r.bucket.to_string(),
            r.bin.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.mass.to_string(),
            r.n_cells.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_timings<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), HarnessError> {
    let mut w = csv_writer(out);
    w.write_record(["dataset", "method", "proportion", "replicate", "seconds"])?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.proportion.to_string(),
            r.replicate.to_string(),
            format!("{:.6}", r.wall_time),
        ])?;
    }
    finish(w)
}

/// Aggregates written next to the records.
pub fn write_summaries(dir: &Path, records: &[TrialRecord], cfg: &super::AggregateConfig) -> Result<super::Curves, HarnessError> {
    let curves = super::aggregate_curves(records, cfg);
    write_curves(BufWriter::new(File::create(dir.join(CURVES_FILE))?), &curves.rows)?;
    write_buckets(
        BufWriter::new(File::create(dir.join(BUCKETS_FILE))?),
        &super::aggregate_buckets(&curves, cfg),
    )?;
    write_histograms(
        BufWriter::new(File::create(dir.join(HISTOGRAMS_FILE))?),
        &super::histogram_data(&curves, cfg),
    )?;
    Ok(curves)
}

/// Run context stored under `[manifest]` in `manifest.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub dataset_sha256: String,
    pub n_rows: usize,
    pub feature_names: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    /// Source rows of the probe instances.
    pub probe_rows: Vec<usize>,
    pub seed_derivation: String,
    pub n_records: usize,
    pub n_failed: usize,
}

impl RunManifest {
    pub fn new(dataset_bytes: &[u8], feature_names: &[String], out: &RunOutput) -> Self {
        let digest = Sha256::digest(dataset_bytes);
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            n_rows: out.split.train.n_rows() + out.split.test.n_rows(),
            feature_names: feature_names.to_vec(),
            n_train: out.split.train.n_rows(),
            n_test: out.split.test.n_rows(),
            probe_rows: out.probe_rows.clone(),
            seed_derivation: "sha256(master seed, dataset id, tag, proportion index, replicate)"
                .into(),
            n_records: out.records.len(),
            n_failed: out.n_failed(),
        }
    }
}

/// Full resolved config followed by the `[manifest]` table. The result loads
/// back as an [`ExperimentConfig`].
pub fn manifest_toml(cfg: &ExperimentConfig, manifest: &RunManifest) -> String {
    #[derive(Serialize)]
    struct Wrapper<'a> {
        manifest: &'a RunManifest,
    }
    format!(
        "{}\n{}",
        cfg.to_toml_string(),
        toml::to_string(&Wrapper { manifest }).expect("manifest serializes")
    )
}

/// Writes records, summaries, timings and the manifest into `dir`.
pub fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    manifest: &RunManifest,
    out: &RunOutput,
) -> Result<super::Curves, HarnessError> {
    std::fs::create_dir_all(dir)?;
    write_records(BufWriter::new(File::create(dir.join(RECORDS_FILE))?), &out.records)?;
    write_timings(BufWriter::new(File::create(dir.join(TIMINGS_FILE))?), &out.records)?;
    std::fs::write(dir.join(MANIFEST_FILE), manifest_toml(cfg, manifest))?;
    write_summaries(dir, &out.records, &cfg.into())
}

pub fn load_records(path: &Path) -> Result<Vec<TrialRecord>, RecordError> {
    read_records(BufReader::new(File::open(path)?))
}
