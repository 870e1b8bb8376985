use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::explain::{LimeConfig, DEFAULT_EXACT_CAP};
use crate::models::{AdditiveConfig, BoostedConfig, ForestConfig, LogisticConfig, ModelKind};
use crate::rankmetrics::{BucketEdges, DEFAULT_PERCENTILES, DEFAULT_TRUNCATION};

/// Explanation method of a method id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Explainer {
    Rcm,
    Mdi,
    Shap,
    Lime,
    SelfExplained,
}

/// A model/explainer pairing, written `model+explainer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodSpec {
    LogisticRcm,
    ForestMdi,
    ForestShap,
    ForestLime,
    BoostedMdi,
    BoostedShap,
    BoostedLime,
    AdditiveSelf,
}

impl MethodSpec {
    pub const ALL: [MethodSpec; 8] = [
        MethodSpec::LogisticRcm,
        MethodSpec::ForestMdi,
        MethodSpec::ForestShap,
        MethodSpec::ForestLime,
        MethodSpec::BoostedMdi,
        MethodSpec::BoostedShap,
        MethodSpec::BoostedLime,
        MethodSpec::AdditiveSelf,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MethodSpec::LogisticRcm => "logistic+rcm",
            MethodSpec::ForestMdi => "forest+mdi",
            MethodSpec::ForestShap => "forest+shap",
            MethodSpec::ForestLime => "forest+lime",
            MethodSpec::BoostedMdi => "boosted+mdi",
            MethodSpec::BoostedShap => "boosted+shap",
            MethodSpec::BoostedLime => "boosted+lime",
            MethodSpec::AdditiveSelf => "additive+self",
        }
    }

    pub fn model(self) -> ModelKind {
        match self {
            MethodSpec::LogisticRcm => ModelKind::Logistic,
            MethodSpec::ForestMdi | MethodSpec::ForestShap | MethodSpec::ForestLime => {
                ModelKind::Forest
            }
            MethodSpec::BoostedMdi | MethodSpec::BoostedShap | MethodSpec::BoostedLime => {
                ModelKind::Boosted
            }
            MethodSpec::AdditiveSelf => ModelKind::Additive,
        }
    }

    pub fn explainer(self) -> Explainer {
        match self {
            MethodSpec::LogisticRcm => Explainer::Rcm,
            MethodSpec::ForestMdi | MethodSpec::BoostedMdi => Explainer::Mdi,
            MethodSpec::ForestShap | MethodSpec::BoostedShap => Explainer::Shap,
            MethodSpec::ForestLime | MethodSpec::BoostedLime => Explainer::Lime,
            MethodSpec::AdditiveSelf => Explainer::SelfExplained,
        }
    }

    /// MDI has no local form.
    pub fn global(self) -> bool {
        self.explainer() != Explainer::Lime
    }

    /// LIME has no global form.
    pub fn local(self) -> bool {
        self.explainer() != Explainer::Mdi
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MethodSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodSpec::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method `{s}`")))
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for MethodSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    pub label_column: String,
    /// Defaults to the file stem.
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub proportions: Vec<f64>,
    pub replicates: usize,
    pub probes: usize,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    pub train_fraction: f64,
    pub bucket_edges: [f64; 3],
    /// Root under which timestamped run directories are created.
    pub output_dir: Option<PathBuf>,
}

pub fn default_proportions() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 10.0).collect()
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            proportions: default_proportions(),
            replicates: 200,
            probes: 5,
            seed: 0,
            methods: MethodSpec::ALL.to_vec(),
            train_fraction: 0.7,
            bucket_edges: BucketEdges::default().0,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub shap_exact_cap: usize,
    pub shap_permutations: usize,
    /// Background rows drawn from each replicate for SHAP and LIME.
    pub background: usize,
    /// Leading test rows whose mean `|phi|` gives global SHAP importance.
    pub global_instances: usize,
    pub lime: LimeConfig,
    pub truncation: usize,
    pub histogram_bins: usize,
    pub percentiles: (f64, f64),
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            shap_exact_cap: DEFAULT_EXACT_CAP,
            shap_permutations: 500,
            background: 20,
            global_instances: 20,
            lime: LimeConfig::default(),
            truncation: DEFAULT_TRUNCATION,
            histogram_bins: 20,
            percentiles: DEFAULT_PERCENTILES,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    pub logistic: LogisticConfig,
    pub forest: ForestConfig,
    pub boosted: BoostedConfig,
    pub additive: AdditiveConfig,
}

/// Everything a run needs, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub models: ModelsSection,
}

impl ExperimentConfig {
    /// Parses TOML text. A `[manifest]` table, as written next to run output,
    /// is ignored, so a manifest is itself a valid config.
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        table.remove("manifest");
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative dataset path is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if cfg.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset.path = dir.join(&cfg.dataset.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dataset_id(&self) -> String {
        self.dataset.id.clone().unwrap_or_else(|| {
            self.dataset
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn bucket_edges(&self) -> BucketEdges {
        BucketEdges(self.experiment.bucket_edges)
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let e = &self.experiment;
        if e.proportions.is_empty() {
            return bad("proportion grid is empty".into());
        }
        if let Some(p) = e.proportions.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return bad(format!("proportion {p} outside (0, 1]"));
        }
        if e.replicates < 2 {
            return bad("replicates must be at least 2".into());
        }
        if e.probes == 0 {
            return bad("probes must be at least 1".into());
        }
        if e.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let mut seen = e.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != e.methods.len() {
            return bad("duplicate method".into());
        }
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", e.train_fraction));
        }
        if !self.bucket_edges().is_valid() {
            return bad(format!("bucket edges {:?} are not increasing in [0, 1]", e.bucket_edges));
        }
        let x = &self.explain;
        if x.truncation == 0 {
            return bad("truncation must be at least 1".into());
        }
        if x.histogram_bins < 2 {
            return bad("histogram_bins must be at least 2".into());
        }
        if x.background == 0 || x.global_instances == 0 || x.shap_permutations == 0 {
            return bad("background, global_instances and shap_permutations must be positive".into());
        }
        let (lo, hi) = x.percentiles;
        if !(0.0 <= lo && lo <= hi && hi <= 100.0) {
            return bad(format!("percentiles ({lo}, {hi}) invalid"));
        }
        if x.lime.n_samples < crate::explain::MIN_LIME_SAMPLES {
            return bad("lime.n_samples too small".into());
        }
        if self.models.forest.n_trees == 0 {
            return bad("forest.n_trees must be at least 1".into());
        }
        Ok(())
    }
}
