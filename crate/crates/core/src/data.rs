//! Dataset ingestion, standardization, splitting and resampling.
//!
//! Every resampling routine is a pure function of its input and an explicit
//! `u64` seed. Generators are ChaCha8 so draws are stable across platforms
//! and crate upgrades.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Maximum number of re-draws when a partition or resample comes out single-class.
pub const MAX_CLASS_RETRIES: usize = 50;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("cannot parse value {value:?} at line {line}, column `{column}`")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("dataset contains a single class")]
    SingleClassDataset,
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("duplicate feature name `{0}`")]
    DuplicateName(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("could not draw a two-class sample after {0} attempts")]
    CannotStratify(usize),
    #[error("fraction {0} outside the allowed range")]
    InvalidFraction(f64),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Numeric feature matrix with binary labels and named columns.
///
/// Construction validates finiteness, label values, name uniqueness and the
/// presence of both classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let (rows, cols) = features.dim();
        if rows == 0 {
            return Err(DataError::EmptyDataset);
        }
        if cols == 0 {
            return Err(DataError::NoFeatures);
        }
        if labels.len() != rows {
            return Err(DataError::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                rows
            )));
        }
        if feature_names.len() != cols {
            return Err(DataError::Shape(format!(
                "{} names for {} columns",
                feature_names.len(),
                cols
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateName(name.clone()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(DataError::InvalidLabel(bad));
        }
        for ((row, col), v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(DataError::NonFinite { row, col });
            }
        }
        let d = Self {
            features,
            labels,
            feature_names,
        };
        if !d.has_both_classes() {
            return Err(DataError::SingleClassDataset);
        }
        Ok(d)
    }

    /// Builds a dataset from row slices, naming columns `x0`, `x1`, ...
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self, DataError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(DataError::Shape("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| DataError::Shape(e.to_string()))?;
        let names = (0..cols).map(|j| format!("x{j}")).collect();
        Self::new(features, labels, names)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features
            .row(i)
            .to_slice()
            .expect("dataset matrices are kept in standard layout")
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    fn has_both_classes(&self) -> bool {
        let pos = self.positives();
        pos > 0 && pos < self.labels.len()
    }

    /// Rows at `indices` (duplicates allowed), in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self, DataError> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(
            as_standard(features),
            labels,
            self.feature_names.clone(),
        )
    }

    /// Columns whose values are all equal.
    pub fn constant_columns(&self) -> Vec<usize> {
        self.features
            .axis_iter(Axis(1))
            .enumerate()
            .filter(|(_, col)| col.iter().all(|&v| v == col[0]))
            .map(|(j, _)| j)
            .collect()
    }
}

fn as_standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Reads a headered CSV, splitting off `label_column` as the 0/1 target.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::MissingColumn(label_column.to_string()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, cell) in record.iter().enumerate() {
            let parse_err = || DataError::Parse {
                line,
                column: headers.get(j).unwrap_or("?").to_string(),
                value: cell.to_string(),
            };
            if j == label_idx {
                let label = match cell {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    _ => return Err(parse_err()),
                };
                labels.push(label);
            } else {
                let v: f64 = cell.parse().map_err(|_| parse_err())?;
                if !v.is_finite() {
                    return Err(parse_err());
                }
                flat.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let features = Array2::from_shape_vec((labels.len(), names.len()), flat)
        .map_err(|e| DataError::Shape(e.to_string()))?;
    Dataset::new(features, labels, names)
}

/// Writes `d` as a headered CSV with the label in the last column, named
/// `label_column`. Values round-trip exactly through [`load_csv`].
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header)?;
    for (row, label) in d.features.rows().into_iter().zip(&d.labels) {
        let mut cells: Vec<String> = row.iter().map(f64::to_string).collect();
        cells.push(label.to_string());
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

/// Synthetic data with a known answer.
///
/// Features are uniform on `[-1, 1]` and named `x0, x1, ...`. The label is
/// `1[sum_j w_j x_j > 0]` over the first `informative` features with weights
/// `1, 0.7, 0.7^2, ...`, then flipped with probability `flip`. The remaining
/// features are pure noise.
pub fn planted(
    rows: usize,
    features: usize,
    informative: usize,
    flip: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if informative > features {
        return Err(DataError::Shape(format!(
            "{informative} informative of {features} features"
        )));
    }
    if !(0.0..=1.0).contains(&flip) {
        return Err(DataError::InvalidFraction(flip));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_simple_fn((rows, features), || rng.gen_range(-1.0..1.0));
    let labels = x
        .rows()
        .into_iter()
        .map(|r| {
            let score: f64 = (0..informative).map(|j| 0.7f64.powi(j as i32) * r[j]).sum();
            u8::from(score > 0.0) ^ u8::from(rng.gen_bool(flip))
        })
        .collect();
    let names = (0..features).map(|j| format!("x{j}")).collect();
    Dataset::new(x, labels, names)
}

/// `p * n` snapped to the nearest integer when within rounding noise of it,
/// so that e.g. `0.3 * 100` is treated as exactly 30.
fn scaled_count(fraction: f64, n: usize) -> f64 {
    let raw = fraction * n as f64;
    if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw
    }
}

/// A train/test partition of one source dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    /// Source row indices of the training partition, in partition order.
    pub train_rows: Vec<usize>,
    /// Source row indices of the test partition, in partition order.
    pub test_rows: Vec<usize>,
}

/// Uniformly random partition with `floor(train_fraction * M)` training rows.
/// Re-draws up to [`MAX_CLASS_RETRIES`] times until both sides hold both classes.
pub fn train_test_split(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitPair, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let m = d.n_rows();
    if m < 10 {
        return Err(DataError::TooFewRows { needed: 10, got: m });
    }
    let n_train = scaled_count(train_fraction, m).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    for _ in 0..MAX_CLASS_RETRIES {
        order.shuffle(&mut rng);
        let (tr, te) = order.split_at(n_train);
        if let (Ok(train), Ok(test)) = (d.select_rows(tr), d.select_rows(te)) {
            return Ok(SplitPair {
                train,
                test,
                seed,
                train_rows: tr.to_vec(),
                test_rows: te.to_vec(),
            });
        }
    }
    Err(DataError::CannotStratify(MAX_CLASS_RETRIES))
}

/// Number of rows [`subsample_bootstrap`] draws for a given proportion.
pub fn bootstrap_size(n: usize, proportion: f64) -> usize {
    (scaled_count(proportion, n).ceil() as usize).max(1)
}

/// Row indices of one with-replacement draw of size `ceil(proportion * n)`.
/// Re-draws until the sample holds both classes.
pub fn subsample_bootstrap_rows(
    train: &Dataset,
    proportion: f64,
    seed: u64,
) -> Result<Vec<usize>, DataError> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(DataError::InvalidFraction(proportion));
    }
    let n = train.n_rows();
    let size = bootstrap_size(n, proportion);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CLASS_RETRIES {
        let rows: Vec<usize> = (0..size).map(|_| rng.gen_range(0..n)).collect();
        let pos = rows.iter().filter(|&&i| train.labels[i] == 1).count();
        if pos > 0 && pos < size {
            return Ok(rows);
        }
    }
    Err(DataError::CannotStratify(MAX_CLASS_RETRIES))
}

/// Subsample and bootstrap in one draw: `ceil(proportion * |train|)` rows
/// sampled with replacement.
pub fn subsample_bootstrap(
    train: &Dataset,
    proportion: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    let rows = subsample_bootstrap_rows(train, proportion, seed)?;
    train.select_rows(&rows)
}

/// Per-feature centering and scaling fitted on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    /// Fits column means and population standard deviations.
    /// Constant columns get a standard deviation of 1.
    pub fn fit(features: &Array2<f64>) -> Self {
        let n = features.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(features.ncols());
        let mut std = Vec::with_capacity(features.ncols());
        for col in features.axis_iter(Axis(1)) {
            let (m, s) = mean_std(col, n);
            mean.push(m);
            std.push(if s > 0.0 { s } else { 1.0 });
        }
        Self { mean, std }
    }

    pub fn identity(n_features: usize) -> Self {
        Self {
            mean: vec![0.0; n_features],
            std: vec![1.0; n_features],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (x[j] - self.mean[j]) / self.std[j];
        }
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.transform_row_into(x, &mut out);
        out
    }

    pub fn transform(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

fn mean_std(col: ArrayView1<'_, f64>, n: f64) -> (f64, f64) {
    let m = col.sum() / n;
    // Constant columns must come out exactly constant.
    if col.iter().all(|&v| v == col[0]) {
        return (col[0], 0.0);
    }
    let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

pub fn fit_standardizer(d: &Dataset) -> Standardizer {
    Standardizer::fit(d.features())
}

/// Applies `s` to every row of `d`. Labels and names are carried over.
pub fn apply_standardizer(s: &Standardizer, d: &Dataset) -> Dataset {
    Dataset {
        features: s.transform(d.features()),
        labels: d.labels.clone(),
        feature_names: d.feature_names.clone(),
    }
}
