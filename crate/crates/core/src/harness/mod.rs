//! Experiment driver: resample, fit, explain, record, aggregate.
//!
//! [`run_experiment`] produces one [`TrialRecord`] per (proportion,
//! replicate, method). Everything downstream ([`aggregate_curves`],
//! [`aggregate_buckets`], [`histogram_data`]) is a pure function of those
//! records, so summaries can be rebuilt from `records.jsonl` alone.

mod aggregate;
mod config;
mod io;
mod records;
mod run;

pub use aggregate::{
    aggregate_buckets, aggregate_curves, histogram_bin, histogram_data, AggregateConfig,
    BucketSummary, CurveRow, Curves, DroppedCell, HistogramRow, RankScope,
};
pub use config::{
    default_proportions, DatasetSection, ExperimentConfig, ExperimentSection, ExplainSection,
    Explainer, MethodSpec, ModelsSection,
};
pub use io::{
    load_records, manifest_toml, write_buckets, write_curves, write_histograms, write_run,
    write_summaries, write_timings, RunManifest, BUCKETS_FILE, CURVES_FILE, HISTOGRAMS_FILE,
    MANIFEST_FILE, RECORDS_FILE, TIMINGS_FILE,
};
pub use records::{read_records, write_records, RecordError, TrialRecord, SCHEMA_VERSION};
pub use run::{derive_seed, fit_model, run_experiment, RunOptions, RunOutput};

use thiserror::Error;

use crate::data::DataError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Records(#[from] RecordError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
