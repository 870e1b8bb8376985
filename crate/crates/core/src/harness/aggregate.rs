use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, MethodSpec, TrialRecord};
use crate::rankmetrics::{
    p_mode_at, perturbation_interval, stability, stability_contributions, AccuracyBucket,
    BucketEdges, MetricError, PerturbationInterval, DEFAULT_PERCENTILES, DEFAULT_TRUNCATION,
    MODE_DEPTH,
};

/// Settings that turn records into summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateConfig {
    pub truncation: usize,
    pub edges: BucketEdges,
    pub histogram_bins: usize,
    pub percentiles: (f64, f64),
}

impl Default for AggregateConfig {
    fn default() -> Self {
        Self {
            truncation: DEFAULT_TRUNCATION,
            edges: BucketEdges::default(),
            histogram_bins: 20,
            percentiles: DEFAULT_PERCENTILES,
        }
    }
}

impl From<&ExperimentConfig> for AggregateConfig {
    fn from(c: &ExperimentConfig) -> Self {
        Self {
            truncation: c.explain.truncation,
            edges: c.bucket_edges(),
            histogram_bins: c.explain.histogram_bins,
            percentiles: c.explain.percentiles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankScope {
    Global,
    Local,
}

impl RankScope {
    pub fn as_str(self) -> &'static str {
        match self {
            RankScope::Global => "global",
            RankScope::Local => "local",
        }
    }
}

impl fmt::Display for RankScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Metrics of one (dataset, method, scope, proportion) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub dataset: String,
    pub method: MethodSpec,
    pub scope: RankScope,
    pub proportion: f64,
    pub n_valid: usize,
    pub n_failed: usize,
    pub mean_f1: f64,
    pub f1: PerturbationInterval,
    /// Local scope: mean over probes of per-probe values.
    pub stability: f64,
    /// Over per-replicate leave-one-out contributions.
    pub stability_band: PerturbationInterval,
    pub p_mode: f64,
}

/// A cell left out of the curves because fewer than two trials succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedCell {
    pub dataset: String,
    pub method: MethodSpec,
    pub proportion: f64,
    pub n_valid: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub rows: Vec<CurveRow>,
    pub dropped: Vec<DroppedCell>,
    pub methods: Vec<MethodSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSummary {
    pub method: MethodSpec,
    pub scope: RankScope,
    pub bucket: AccuracyBucket,
    pub n_cells: usize,
    pub mean_stability: Option<f64>,
    pub stability_band: Option<PerturbationInterval>,
    pub mean_p_mode: Option<f64>,
    pub p_mode_band: Option<PerturbationInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub method: MethodSpec,
    pub scope: RankScope,
    pub bucket: AccuracyBucket,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub mass: f64,
    pub n_cells: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Band over `values`; a single value gives a zero-width band.
fn band(values: &[f64], percentiles: (f64, f64)) -> Option<PerturbationInterval> {
    match values {
        [] => None,
        [v] => Some(PerturbationInterval {
            center: *v,
            lower: *v,
            upper: *v,
            percentiles,
        }),
        _ => perturbation_interval(values, percentiles).ok(),
    }
}

struct ScopeMetrics {
    stability: f64,
    p_mode: f64,
    contributions: Vec<f64>,
}

fn scope_metrics(rankings: &[&[String]], truncation: usize) -> Result<ScopeMetrics, MetricError> {
    let depth = rankings.iter().map(|r| r.len()).min().unwrap_or(0).min(MODE_DEPTH);
    Ok(ScopeMetrics {
        stability: stability(rankings, truncation)?.value,
        p_mode: p_mode_at(rankings, depth)?.value,
        contributions: stability_contributions(rankings, truncation)?,
    })
}

fn local_metrics(valid: &[&TrialRecord], truncation: usize) -> Result<ScopeMetrics, MetricError> {
    let n_probes = valid
        .iter()
        .map(|r| r.local_ranks.as_ref().map_or(0, Vec::len))
        .min()
        .unwrap_or(0);
    if n_probes == 0 {
        return Err(MetricError::TooFewRankings { needed: 1, got: 0 });
    }
    let mut per_probe = Vec::with_capacity(n_probes);
    for j in 0..n_probes {
        let rankings: Vec<&[String]> = valid
            .iter()
            .map(|r| r.local_ranks.as_ref().expect("checked above")[j].as_slice())
            .collect();
        per_probe.push(scope_metrics(&rankings, truncation)?);
    }
    let n = per_probe.len() as f64;
    let contributions = (0..valid.len())
        .map(|i| per_probe.iter().map(|m| m.contributions[i]).sum::<f64>() / n)
        .collect();
    Ok(ScopeMetrics {
        stability: per_probe.iter().map(|m| m.stability).sum::<f64>() / n,
        p_mode: per_probe.iter().map(|m| m.p_mode).sum::<f64>() / n,
        contributions,
    })
}

/// Per-cell accuracy and interpretation metrics.
///
/// Cells are ordered by dataset, method (in [`MethodSpec::ALL`] order),
/// proportion index and scope. Records inside a cell are ordered by
/// replicate first, so the result does not depend on record order.
pub fn aggregate_curves(records: &[TrialRecord], cfg: &AggregateConfig) -> Curves {
    let mut cells: BTreeMap<(&str, MethodSpec, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.dataset.as_str(), r.method, r.proportion_index))
            .or_default()
            .push(r);
    }
    let methods: BTreeSet<MethodSpec> = records.iter().map(|r| r.method).collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for ((dataset, method, _), mut cell) in cells {
        cell.sort_by_key(|r| r.replicate);
        let proportion = cell[0].proportion;
        let valid: Vec<&TrialRecord> = cell
            .iter()
            .copied()
            .filter(|r| r.is_ok() && r.f1.is_some())
            .collect();
        let n_failed = cell.len() - valid.len();
        let drop = || DroppedCell {
            dataset: dataset.to_string(),
            method,
            proportion,
            n_valid: valid.len(),
            n_failed,
        };
        if valid.len() < 2 {
            dropped.push(drop());
            continue;
        }
        let f1s: Vec<f64> = valid.iter().map(|r| r.f1.expect("filtered")).collect();
        let f1_band = band(&f1s, cfg.percentiles).expect("two values");

        let mut scoped = Vec::new();
        if method.global() {
            let rankings: Option<Vec<&[String]>> =
                valid.iter().map(|r| r.global_rank.as_deref()).collect();
            scoped.push((
                RankScope::Global,
                rankings
                    .ok_or(MetricError::TooFewRankings { needed: 2, got: 0 })
                    .and_then(|rs| scope_metrics(&rs, cfg.truncation)),
            ));
        }
        if method.local() {
            scoped.push((RankScope::Local, local_metrics(&valid, cfg.truncation)));
        }
        for (scope, metrics) in scoped {
            let Ok(m) = metrics else {
                dropped.push(drop());
                continue;
            };
            rows.push(CurveRow {
                dataset: dataset.to_string(),
                method,
                scope,
                proportion,
                n_valid: valid.len(),
                n_failed,
                mean_f1: mean(&f1s),
                f1: f1_band,
                stability: m.stability,
                stability_band: band(&m.contributions, cfg.percentiles).expect("two values"),
                p_mode: m.p_mode,
            });
        }
    }
    Curves {
        rows,
        dropped,
        methods: methods.into_iter().collect(),
    }
}

fn cells_by_bucket<'a>(
    curves: &'a Curves,
    edges: &BucketEdges,
) -> BTreeMap<(MethodSpec, RankScope, AccuracyBucket), Vec<&'a CurveRow>> {
    let mut groups: BTreeMap<_, Vec<&CurveRow>> = BTreeMap::new();
    for row in &curves.rows {
        if let Some(b) = edges.bucket(row.mean_f1) {
            groups.entry((row.method, row.scope, b)).or_default().push(row);
        }
    }
    groups
}

fn scopes(method: MethodSpec) -> impl Iterator<Item = RankScope> {
    [
        method.global().then_some(RankScope::Global),
        method.local().then_some(RankScope::Local),
    ]
    .into_iter()
    .flatten()
}

/// Mean stability and pMode per (method, scope, bucket), each cell placed by
/// its mean F1. Every combination is reported; empty ones have no values.
pub fn aggregate_buckets(curves: &Curves, cfg: &AggregateConfig) -> Vec<BucketSummary> {
    let groups = cells_by_bucket(curves, &cfg.edges);
    let mut out = Vec::new();
    for &method in &curves.methods {
        for scope in scopes(method) {
            for bucket in AccuracyBucket::ALL {
                let cells = groups.get(&(method, scope, bucket)).map_or(&[][..], Vec::as_slice);
                let stab: Vec<f64> = cells.iter().map(|c| c.stability).collect();
                let mode: Vec<f64> = cells.iter().map(|c| c.p_mode).collect();
                out.push(BucketSummary {
                    method,
                    scope,
                    bucket,
                    n_cells: cells.len(),
                    mean_stability: (!cells.is_empty()).then(|| mean(&stab)),
                    stability_band: band(&stab, cfg.percentiles),
                    mean_p_mode: (!cells.is_empty()).then(|| mean(&mode)),
                    p_mode_band: band(&mode, cfg.percentiles),
                });
            }
        }
    }
    out
}

/// Bin of `v` among `bins` equal bins over `[0, 1]`; 1.0 lands in the last.
pub fn histogram_bin(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1)
}

/// Normalized histogram of cell stability per (method, scope, bucket) that
/// has at least one cell.
pub fn histogram_data(curves: &Curves, cfg: &AggregateConfig) -> Vec<HistogramRow> {
    let bins = cfg.histogram_bins.max(2);
    let mut out = Vec::new();
    for ((method, scope, bucket), cells) in cells_by_bucket(curves, &cfg.edges) {
        let mut counts = vec![0usize; bins];
        for c in &cells {
            counts[histogram_bin(c.stability, bins)] += 1;
        }
        for (bin, &count) in counts.iter().enumerate() {
            out.push(HistogramRow {
                method,
                scope,
                bucket,
                bin,
                lower: bin as f64 / bins as f64,
                upper: (bin + 1) as f64 / bins as f64,
                mass: count as f64 / cells.len() as f64,
                n_cells: cells.len(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SCHEMA_VERSION;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn record(method: MethodSpec, replicate: usize, f1: f64, global: &[&str]) -> TrialRecord {
        TrialRecord {
            schema_version: SCHEMA_VERSION,
            dataset: "toy".into(),
            method,
            proportion: 1.0,
            proportion_index: 0,
            replicate,
            seed: 0,
            n_sample: 10,
            f1: Some(f1),
            global_rank: method.global().then(|| names(global)),
            local_ranks: method.local().then(|| vec![names(global), names(global)]),
            error: None,
            wall_time: 0.0,
        }
    }

    #[test]
    fn identical_ranks_are_perfect() {
        let recs: Vec<_> = (0..4)
            .map(|i| record(MethodSpec::ForestMdi, i, 0.9, &["a", "b", "c", "d"]))
            .collect();
        let c = aggregate_curves(&recs, &AggregateConfig::default());
        assert_eq!(c.rows.len(), 1);
        assert_eq!((c.rows[0].stability, c.rows[0].p_mode), (1.0, 1.0));
        assert!((c.rows[0].mean_f1 - 0.9).abs() < 1e-15);
    }

    #[test]
    fn reversed_pair_is_zero() {
        let recs = [
            record(MethodSpec::ForestMdi, 0, 0.7, &["a", "b", "c"]),
            record(MethodSpec::ForestMdi, 1, 0.7, &["c", "b", "a"]),
        ];
        let c = aggregate_curves(&recs, &AggregateConfig::default());
        assert_eq!(c.rows[0].stability, 0.0);
    }

    #[test]
    fn matches_direct_metric_calls() {
        let ranks = [["a", "b", "c", "d"], ["b", "a", "c", "d"], ["a", "b", "d", "c"]];
        let recs: Vec<_> = ranks
            .iter()
            .enumerate()
            .map(|(i, r)| record(MethodSpec::LogisticRcm, i, 0.6 + 0.1 * i as f64, r))
            .collect();
        let c = aggregate_curves(&recs, &AggregateConfig::default());
        let direct: Vec<Vec<String>> = ranks.iter().map(|r| names(r)).collect();
        let s = stability(&direct, 10).unwrap().value;
        let p = p_mode_at(&direct, 3).unwrap().value;
        let global = &c.rows[0];
        assert_eq!(global.scope, RankScope::Global);
        assert_eq!((global.stability, global.p_mode), (s, p));
        assert!((global.mean_f1 - 0.7).abs() < 1e-12);
        // two probes that both equal the global ranking
        let local = &c.rows[1];
        assert_eq!(local.scope, RankScope::Local);
        assert!((local.stability - s).abs() < 1e-15);
        assert!((local.stability_band.center - s).abs() < 1e-12);
    }

    #[test]
    fn thin_cells_are_dropped() {
        let mut bad = record(MethodSpec::ForestMdi, 1, 0.9, &["a", "b"]);
        bad.error = Some("boom".into());
        bad.f1 = None;
        let recs = [record(MethodSpec::ForestMdi, 0, 0.9, &["a", "b"]), bad];
        let c = aggregate_curves(&recs, &AggregateConfig::default());
        assert!(c.rows.is_empty());
        assert_eq!(c.dropped.len(), 1);
        assert_eq!((c.dropped[0].n_valid, c.dropped[0].n_failed), (1, 1));
    }

    fn row(method: MethodSpec, f1: f64, stability: f64) -> CurveRow {
        let pi = PerturbationInterval {
            center: f1,
            lower: f1,
            upper: f1,
            percentiles: DEFAULT_PERCENTILES,
        };
        CurveRow {
            dataset: "toy".into(),
            method,
            scope: RankScope::Global,
            proportion: 1.0,
            n_valid: 2,
            n_failed: 0,
            mean_f1: f1,
            f1: pi,
            stability,
            stability_band: pi,
            p_mode: stability,
        }
    }

    fn curves(rows: Vec<CurveRow>) -> Curves {
        Curves {
            rows,
            dropped: vec![],
            methods: vec![MethodSpec::ForestMdi],
        }
    }

    #[test]
    fn bucket_means() {
        let cfg = AggregateConfig::default();
        let b = aggregate_buckets(&curves(vec![row(MethodSpec::ForestMdi, 0.9, 0.8)]), &cfg);
        assert_eq!(b.len(), 3);
        let high = b.iter().find(|s| s.bucket == AccuracyBucket::High).unwrap();
        assert_eq!((high.n_cells, high.mean_stability), (1, Some(0.8)));
        assert!(b.iter().filter(|s| s.bucket != AccuracyBucket::High).all(|s| s.n_cells == 0));

        let b = aggregate_buckets(
            &curves(vec![row(MethodSpec::ForestMdi, 0.6, 0.1), row(MethodSpec::ForestMdi, 0.7, 0.1)]),
            &cfg,
        );
        assert_eq!(b[0].n_cells, 1);
        assert_eq!(b[1].n_cells, 1);

        let b = aggregate_buckets(
            &curves(vec![row(MethodSpec::ForestMdi, 0.85, 0.4), row(MethodSpec::ForestMdi, 0.95, 0.8)]),
            &cfg,
        );
        assert!((b[2].mean_stability.unwrap() - 0.6).abs() < 1e-15);
        let unbucketed = aggregate_buckets(&curves(vec![row(MethodSpec::ForestMdi, 0.3, 0.5)]), &cfg);
        assert!(unbucketed.iter().all(|s| s.n_cells == 0));
    }

    #[test]
    fn histograms() {
        let mut cfg = AggregateConfig::default();
        let h = histogram_data(&curves(vec![row(MethodSpec::ForestMdi, 0.9, 1.0)]), &cfg);
        assert_eq!(h.len(), 20);
        assert_eq!(h[19].mass, 1.0);

        cfg.histogram_bins = 2;
        let h = histogram_data(
            &curves(vec![row(MethodSpec::ForestMdi, 0.9, 0.0), row(MethodSpec::ForestMdi, 0.9, 1.0)]),
            &cfg,
        );
        assert_eq!(h.iter().map(|r| r.mass).collect::<Vec<_>>(), [0.5, 0.5]);
    }
}
