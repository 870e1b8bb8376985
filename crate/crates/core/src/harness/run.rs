use std::collections::HashMap;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{
    Explainer, ExperimentConfig, HarnessError, MethodSpec, ModelsSection, TrialRecord,
    SCHEMA_VERSION,
};
use crate::data::{subsample_bootstrap_rows, train_test_split, Dataset, SplitPair};
use crate::explain::{
    additive_global, additive_local, lime_local, mdi_global, rcm_global, rcm_local,
    shap_global_from_local, shap_local, ExplainError, RankVector, ShapleyMode,
};
use crate::models::{
    fit_additive, fit_boosted, fit_forest, fit_logistic, Classifier, FittedModel, ModelError,
    ModelKind,
};
use crate::rankmetrics::f1_score;

/// First 8 bytes (little-endian) of SHA-256 over the trial coordinates.
pub fn derive_seed(master: u64, dataset: &str, p_index: usize, replicate: usize, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for part in [dataset.as_bytes(), tag.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update((p_index as u64).to_le_bytes());
    h.update((replicate as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1 }
    }
}

/// Records plus the fixed context they were produced under.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub split: SplitPair,
    /// Source rows of the probe instances.
    pub probe_rows: Vec<usize>,
}

impl RunOutput {
    pub fn n_failed(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

pub fn fit_model(
    kind: ModelKind,
    d: &Dataset,
    models: &ModelsSection,
    seed: u64,
) -> Result<FittedModel, ModelError> {
    Ok(match kind {
        ModelKind::Logistic => FittedModel::Logistic(fit_logistic(d, &models.logistic)?),
        ModelKind::Forest => FittedModel::Forest(fit_forest(d, &models.forest, seed)?),
        ModelKind::Boosted => FittedModel::Boosted(fit_boosted(d, &models.boosted)?),
        ModelKind::Additive => FittedModel::Additive(fit_additive(d, &models.additive)?),
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    dataset_id: String,
    train: &'a Dataset,
    test: &'a Dataset,
    names: &'a [String],
    probes: usize,
}

type Ranks = (Option<RankVector>, Option<Vec<RankVector>>);

impl Context<'_> {
    fn seed(&self, p_index: usize, replicate: usize, tag: &str) -> u64 {
        derive_seed(self.cfg.experiment.seed, &self.dataset_id, p_index, replicate, tag)
    }

    fn names(&self, r: &RankVector) -> Vec<String> {
        r.as_slice().iter().map(|&i| self.names[i].clone()).collect()
    }

    fn explain(
        &self,
        method: MethodSpec,
        model: &FittedModel,
        sample: &Dataset,
        background: &Array2<f64>,
        seed: u64,
    ) -> Result<Ranks, ExplainError> {
        let x = &self.cfg.explain;
        let probe = |j: usize| self.test.row(j);
        let local = |f: &dyn Fn(usize) -> Result<RankVector, ExplainError>| {
            (0..self.probes).map(f).collect::<Result<Vec<_>, _>>()
        };
        let mismatch = || ExplainError::Invalid(format!("{method} cannot explain this model"));
        match (method.explainer(), model) {
            (Explainer::Rcm, FittedModel::Logistic(m)) => Ok((
                Some(rcm_global(m).ranking()),
                Some(local(&|j| Ok(rcm_local(m, probe(j), j)?.ranking()))?),
            )),
            (Explainer::Mdi, FittedModel::Forest(m)) => Ok((Some(mdi_global(m).ranking()), None)),
            (Explainer::Mdi, FittedModel::Boosted(m)) => Ok((Some(mdi_global(m).ranking()), None)),
            (Explainer::Shap, FittedModel::Forest(_) | FittedModel::Boosted(_)) => {
                let mode = ShapleyMode::choose(
                    model.n_features(),
                    x.shap_exact_cap,
                    x.shap_permutations,
                );
                let n_global = x.global_instances.min(self.test.n_rows());
                let explanations = (0..n_global.max(self.probes))
                    .map(|k| {
                        shap_local(model, self.test.row(k), background, mode, seed.wrapping_add(k as u64))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let global = shap_global_from_local(&explanations[..n_global])?.ranking();
                let locals = local(&|j| Ok(explanations[j].importance(j)?.ranking()))?;
                Ok((Some(global), Some(locals)))
            }
            (Explainer::Lime, FittedModel::Forest(_) | FittedModel::Boosted(_)) => {
                let locals = local(&|j| {
                    let e = lime_local(model, probe(j), background, &x.lime, seed.wrapping_add(j as u64))?;
                    Ok(e.importance(j)?.ranking())
                })?;
                Ok((None, Some(locals)))
            }
            (Explainer::SelfExplained, FittedModel::Additive(m)) => Ok((
                Some(additive_global(m, sample.features())?.ranking()),
                Some(local(&|j| Ok(additive_local(m, probe(j), j)?.ranking()))?),
            )),
            _ => Err(mismatch()),
        }
    }

    fn replicate(&self, p_index: usize, replicate: usize) -> Vec<TrialRecord> {
        let e = &self.cfg.experiment;
        let proportion = e.proportions[p_index];
        let blank = |method: MethodSpec| TrialRecord {
            schema_version: SCHEMA_VERSION,
            dataset: self.dataset_id.clone(),
            method,
            proportion,
            proportion_index: p_index,
            replicate,
            seed: self.seed(p_index, replicate, method.id()),
            n_sample: 0,
            f1: None,
            global_rank: None,
            local_ranks: None,
            error: None,
            wall_time: 0.0,
        };

        let sample = subsample_bootstrap_rows(
            self.train,
            proportion,
            self.seed(p_index, replicate, "bootstrap"),
        )
        .and_then(|rows| self.train.select_rows(&rows));
        let sample = match sample {
            Ok(s) => s,
            Err(err) => {
                return e
                    .methods
                    .iter()
                    .map(|&m| TrialRecord {
                        error: Some(format!("resampling: {err}")),
                        ..blank(m)
                    })
                    .collect()
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed(p_index, replicate, "background"));
        let n_bg = self.cfg.explain.background.min(sample.n_rows());
        let bg_rows = index::sample(&mut rng, sample.n_rows(), n_bg).into_vec();
        let background = sample.features().select(ndarray::Axis(0), &bg_rows);

        // each model is fitted once per replicate and shared by its methods
        let mut fitted: HashMap<ModelKind, (Result<(FittedModel, f64), String>, f64)> =
            HashMap::new();
        e.methods
            .iter()
            .map(|&method| {
                let kind = method.model();
                let (model, fit_time) = fitted.entry(kind).or_insert_with(|| {
                    let start = Instant::now();
                    let seed = self.seed(p_index, replicate, kind.as_str());
                    let result = fit_model(kind, &sample, &self.cfg.models, seed)
                        .map_err(|err| format!("fit: {err}"))
                        .and_then(|m| {
                            let predicted = m.predict(self.test.features()).map_err(|e| e.to_string())?;
                            let f1 = f1_score(&predicted, self.test.labels()).map_err(|e| e.to_string())?;
                            Ok((m, f1))
                        });
                    (result, start.elapsed().as_secs_f64())
                });
                let mut record = TrialRecord {
                    n_sample: sample.n_rows(),
                    wall_time: *fit_time,
                    ..blank(method)
                };
                match model {
                    Err(err) => record.error = Some(err.clone()),
                    Ok((model, f1)) => {
                        let start = Instant::now();
                        match self.explain(method, model, &sample, &background, record.seed) {
                            Ok((global, local)) => {
                                record.f1 = Some(*f1);
                                record.global_rank = global.map(|r| self.names(&r));
                                record.local_ranks =
                                    local.map(|rs| rs.iter().map(|r| self.names(r)).collect());
                            }
                            Err(err) => record.error = Some(format!("explain: {err}")),
                        }
                        record.wall_time += start.elapsed().as_secs_f64();
                    }
                }
                record
            })
            .collect()
    }
}

/// Sweeps every proportion and replicate, fitting and explaining each
/// configured method.
///
/// The train/test split uses the master seed directly; probes are the first
/// `probes` test rows. Records come back in (proportion, replicate, method)
/// order whatever the worker count. A failing trial yields a record with its
/// `error` set rather than aborting the run.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    data: &Dataset,
    options: &RunOptions,
) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let split = train_test_split(data, e.train_fraction, e.seed)?;
    if e.probes > split.test.n_rows() {
        return Err(HarnessError::Config(format!(
            "{} probes requested but the test set has {} rows",
            e.probes,
            split.test.n_rows()
        )));
    }
    let ctx = Context {
        cfg,
        dataset_id: cfg.dataset_id(),
        train: &split.train,
        test: &split.test,
        names: data.feature_names(),
        probes: e.probes,
    };
    let units: Vec<(usize, usize)> = (0..e.proportions.len())
        .flat_map(|p| (0..e.replicates).map(move |r| (p, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|err| HarnessError::Config(format!("worker pool: {err}")))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        units
            .par_iter()
            .map(|&(p, r)| ctx.replicate(p, r))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    let probe_rows = split.test_rows[..e.probes].to_vec();
    Ok(RunOutput {
        records,
        split,
        probe_rows,
    })
}
