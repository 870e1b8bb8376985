//! Rank-agreement metrics and accuracy helpers.
//!
//! Rankings are slices of distinct items, most important first. The metric
//! functions are generic over the item type so they work equally on feature
//! indices and on feature names read back from trial records.
//!
//! * [`kendall_tau`]: discordant-pair fraction between two permutations.
//! * [`wkt_distance`]: top-weighted, top-K truncated variant in `[0, 1]`.
//! * [`stability`]: one minus the mean pairwise [`wkt_distance`] (WKT10 at K = 10).
//! * [`p_mode`]: frequency of the most common ordered top-3 prefix.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default truncation depth for [`wkt_distance`].
pub const DEFAULT_TRUNCATION: usize = 10;
/// Prefix length used by [`p_mode`].
pub const MODE_DEPTH: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("rankings do not contain the same elements")]
    MismatchedElements,
    #[error("ranking contains a duplicate element")]
    DuplicateElement,
    #[error("need at least {needed} rankings, got {got}")]
    TooFewRankings { needed: usize, got: usize },
    #[error("ranking has {got} entries, need at least {needed}")]
    RankTooShort { needed: usize, got: usize },
    #[error("predicted and actual label counts differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("truncation depth must be at least 1")]
    ZeroTruncation,
    #[error("invalid percentile pair ({0}, {1})")]
    InvalidPercentiles(f64, f64),
}

fn positions<T: Eq + Hash>(r: &[T]) -> Result<HashMap<&T, usize>, MetricError> {
    let mut pos = HashMap::with_capacity(r.len());
    for (i, item) in r.iter().enumerate() {
        if pos.insert(item, i).is_some() {
            return Err(MetricError::DuplicateElement);
        }
    }
    Ok(pos)
}

/// Number of discordant pairs divided by `C(n, 2)`; 0 for fewer than two items.
pub fn kendall_tau<T: Eq + Hash>(r1: &[T], r2: &[T]) -> Result<f64, MetricError> {
    if r1.len() != r2.len() {
        return Err(MetricError::MismatchedElements);
    }
    let p2 = positions(r2)?;
    positions(r1)?;
    let mapped: Vec<usize> = r1
        .iter()
        .map(|item| p2.get(item).copied().ok_or(MetricError::MismatchedElements))
        .collect::<Result<_, _>>()?;
    let n = mapped.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut discordant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if mapped[i] > mapped[j] {
                discordant += 1;
            }
        }
    }
    Ok(discordant as f64 / (n * (n - 1) / 2) as f64)
}

/// Per-pair weighting for [`weighted_tau_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairWeight {
    /// Every pair counts 1.
    Uniform,
    /// A pair counts `1 / k`, with `k` the best (smallest, 1-based) position
    /// either item holds in either ranking.
    TopRank,
}

/// Weighted Kendall-type distance over the union of two (optionally
/// truncated) rankings.
///
/// Items absent from a truncated ranking share position `len + 1` in it. A
/// pair ordered oppositely counts 1, a pair tied in exactly one ranking counts
/// 1/2. The weighted discordance is divided by the total pair weight, so the
/// result lies in `[0, 1]`.
pub fn weighted_tau_distance<T: Eq + Hash>(
    r1: &[T],
    r2: &[T],
    truncation: Option<usize>,
    weight: PairWeight,
) -> Result<f64, MetricError> {
    if truncation == Some(0) {
        return Err(MetricError::ZeroTruncation);
    }
    let cut = |r: &[T]| truncation.map_or(r.len(), |k| k.min(r.len()));
    let (a, b) = (&r1[..cut(r1)], &r2[..cut(r2)]);
    let (pa, pb) = (positions(a)?, positions(b)?);
    let missing = truncation.unwrap_or(a.len().max(b.len()));

    let mut union: Vec<&T> = a.iter().collect();
    union.extend(b.iter().filter(|item| !pa.contains_key(item)));
    if truncation.is_none() && (union.len() != a.len() || a.len() != b.len()) {
        return Err(MetricError::MismatchedElements);
    }

    // 1-based positions, absent -> missing + 1
    let pos1: Vec<usize> = union
        .iter()
        .map(|item| pa.get(item).map_or(missing + 1, |p| p + 1))
        .collect();
    let pos2: Vec<usize> = union
        .iter()
        .map(|item| pb.get(item).map_or(missing + 1, |p| p + 1))
        .collect();

    // integer tallies per weight level (half-units for discordance), summed in
    // a fixed order so the result does not depend on argument order
    let levels = match weight {
        PairWeight::Uniform => 1,
        PairWeight::TopRank => missing + 1,
    };
    let mut half_disc = vec![0u64; levels];
    let mut pairs = vec![0u64; levels];
    for i in 0..union.len() {
        for j in i + 1..union.len() {
            let level = match weight {
                PairWeight::Uniform => 0,
                PairWeight::TopRank => pos1[i].min(pos1[j]).min(pos2[i]).min(pos2[j]) - 1,
            };
            use std::cmp::Ordering::Equal;
            half_disc[level] += match (pos1[i].cmp(&pos1[j]), pos2[i].cmp(&pos2[j])) {
                (Equal, Equal) => 0,
                (Equal, _) | (_, Equal) => 1,
                (x, y) if x != y => 2,
                _ => 0,
            };
            pairs[level] += 1;
        }
    }
    let (mut disc, mut ceiling) = (0.0, 0.0);
    for (level, (&h, &n)) in half_disc.iter().zip(&pairs).enumerate() {
        let w = 1.0 / (level + 1) as f64;
        disc += 0.5 * h as f64 * w;
        ceiling += n as f64 * w;
    }
    Ok(if ceiling > 0.0 { disc / ceiling } else { 0.0 })
}

/// Top-weighted Kendall-Tau distance on the top-`k` prefixes.
pub fn wkt_distance<T: Eq + Hash>(r1: &[T], r2: &[T], k: usize) -> Result<f64, MetricError> {
    weighted_tau_distance(r1, r2, Some(k), PairWeight::TopRank)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScore {
    /// `1 - mean pairwise distance`; 1 means all rankings agree.
    pub value: f64,
    pub n_rankings: usize,
    pub truncation: usize,
    pub n_pairs: usize,
}

/// Full matrix of pairwise [`wkt_distance`] values.
pub fn pairwise_distances<T: Eq + Hash, R: AsRef<[T]>>(
    rankings: &[R],
    k: usize,
) -> Result<Vec<Vec<f64>>, MetricError> {
    let n = rankings.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = wkt_distance(rankings[i].as_ref(), rankings[j].as_ref(), k)?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// One minus the mean [`wkt_distance`] over all `C(N, 2)` pairs.
pub fn stability<T: Eq + Hash, R: AsRef<[T]>>(
    rankings: &[R],
    k: usize,
) -> Result<StabilityScore, MetricError> {
    let n = rankings.len();
    if n < 2 {
        return Err(MetricError::TooFewRankings { needed: 2, got: n });
    }
    let d = pairwise_distances(rankings, k)?;
    let n_pairs = n * (n - 1) / 2;
    let total: f64 = (0..n).flat_map(|i| d[i][i + 1..].iter()).sum();
    Ok(StabilityScore {
        value: 1.0 - total / n_pairs as f64,
        n_rankings: n,
        truncation: k,
        n_pairs,
    })
}

/// Per-ranking agreement: `1 - mean distance to every other ranking`.
/// These average to [`stability`]'s value.
pub fn stability_contributions<T: Eq + Hash, R: AsRef<[T]>>(
    rankings: &[R],
    k: usize,
) -> Result<Vec<f64>, MetricError> {
    let n = rankings.len();
    if n < 2 {
        return Err(MetricError::TooFewRankings { needed: 2, got: n });
    }
    let d = pairwise_distances(rankings, k)?;
    Ok(d.iter()
        .map(|row| 1.0 - row.iter().sum::<f64>() / (n - 1) as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruenessScore<T> {
    /// Frequency of the modal prefix.
    pub value: f64,
    pub mode: Vec<T>,
    pub n_rankings: usize,
}

/// Frequency of the most common ordered top-`depth` prefix.
///
/// Equally frequent prefixes resolve to the smallest one under `T`'s order.
pub fn p_mode_at<T: Ord + Clone, R: AsRef<[T]>>(
    rankings: &[R],
    depth: usize,
) -> Result<TruenessScore<T>, MetricError> {
    if rankings.is_empty() {
        return Err(MetricError::TooFewRankings { needed: 1, got: 0 });
    }
    let mut counts: BTreeMap<&[T], usize> = BTreeMap::new();
    for r in rankings {
        let r = r.as_ref();
        if r.len() < depth {
            return Err(MetricError::RankTooShort {
                needed: depth,
                got: r.len(),
            });
        }
        *counts.entry(&r[..depth]).or_default() += 1;
    }
    let mut best: Option<(&[T], usize)> = None;
    for (&prefix, &c) in &counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((prefix, c));
        }
    }
    let (mode, count) = best.expect("at least one ranking");
    Ok(TruenessScore {
        value: count as f64 / rankings.len() as f64,
        mode: mode.to_vec(),
        n_rankings: rankings.len(),
    })
}

/// pMode: frequency of the modal ordered top-3 prefix.
pub fn p_mode<T: Ord + Clone, R: AsRef<[T]>>(
    rankings: &[R],
) -> Result<TruenessScore<T>, MetricError> {
    p_mode_at(rankings, MODE_DEPTH)
}

/// F1 of the positive class; 0 when precision and recall are both 0.
pub fn f1_score(predicted: &[u8], actual: &[u8]) -> Result<f64, MetricError> {
    if predicted.len() != actual.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), actual.len()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p == 1, a == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    // 2PR/(P+R) == 2TP/(2TP+FP+FN)
    let denom = 2 * tp + fp + fn_;
    Ok(if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccuracyBucket {
    Low,
    Medium,
    High,
}

impl AccuracyBucket {
    pub const ALL: [AccuracyBucket; 3] = [Self::Low, Self::Medium, Self::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        }
    }
}

impl fmt::Display for AccuracyBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lower edges of the low, medium and high buckets. Intervals are half-open
/// at interior edges and the high bucket is closed at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketEdges(pub [f64; 3]);

impl Default for BucketEdges {
    fn default() -> Self {
        Self([0.5, 0.65, 0.8])
    }
}

impl BucketEdges {
    pub fn is_valid(&self) -> bool {
        let [a, b, c] = self.0;
        0.0 <= a && a < b && b < c && c <= 1.0
    }

    pub fn bucket(&self, f1: f64) -> Option<AccuracyBucket> {
        let [low, medium, high] = self.0;
        if !(low..=1.0).contains(&f1) {
            None
        } else if f1 >= high {
            Some(AccuracyBucket::High)
        } else if f1 >= medium {
            Some(AccuracyBucket::Medium)
        } else {
            Some(AccuracyBucket::Low)
        }
    }

    /// `[lo, hi)` interval of a bucket (the high bucket includes 1).
    pub fn interval(&self, b: AccuracyBucket) -> (f64, f64) {
        let [low, medium, high] = self.0;
        match b {
            AccuracyBucket::Low => (low, medium),
            AccuracyBucket::Medium => (medium, high),
            AccuracyBucket::High => (high, 1.0),
        }
    }
}

/// low = [0.5, 0.65), medium = [0.65, 0.8), high = [0.8, 1.0]; below 0.5 is unbucketed.
pub fn bucketize(f1: f64) -> Option<AccuracyBucket> {
    BucketEdges::default().bucket(f1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationInterval {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub percentiles: (f64, f64),
}

/// Default percentile band.
pub const DEFAULT_PERCENTILES: (f64, f64) = (10.0, 90.0);

/// Linear-interpolation percentile of sorted data (`q` in `[0, 100]`).
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean plus the two percentile bounds of `values`.
pub fn perturbation_interval(
    values: &[f64],
    percentiles: (f64, f64),
) -> Result<PerturbationInterval, MetricError> {
    if values.len() < 2 {
        return Err(MetricError::TooFewValues(values.len()));
    }
    let (lo, hi) = percentiles;
    if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo > hi {
        return Err(MetricError::InvalidPercentiles(lo, hi));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PerturbationInterval {
        center: values.iter().sum::<f64>() / values.len() as f64,
        lower: percentile_sorted(&sorted, lo),
        upper: percentile_sorted(&sorted, hi),
        percentiles,
    })
}

/// Items of `r` that occur more than once.
pub fn duplicates<T: Eq + Hash + Clone>(r: &[T]) -> Vec<T> {
    let mut seen = HashSet::new();
    r.iter().filter(|x| !seen.insert(*x)).cloned().collect()
}
