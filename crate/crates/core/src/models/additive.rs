use serde::{Deserialize, Serialize};

use super::{log_odds, sigmoid, Classifier, ModelError};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdditiveConfig {
    pub cycles: usize,
    pub bins: usize,
    pub learning_rate: f64,
}

impl Default for AdditiveConfig {
    fn default() -> Self {
        Self {
            cycles: 50,
            bins: 16,
            learning_rate: 0.1,
        }
    }
}

/// Piecewise-constant function of one feature.
///
/// `values[b]` applies to bin `b`, where bin `b` holds inputs with exactly `b`
/// cut points strictly below them.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunction {
    cuts: Vec<f64>,
    values: Vec<f64>,
}

impl ShapeFunction {
    pub fn new(cuts: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != cuts.len() + 1 {
            return Err(ModelError::Invalid(format!(
                "{} values for {} cut points",
                values.len(),
                cuts.len()
            )));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) || cuts.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::Invalid("cut points must increase".into()));
        }
        Ok(Self { cuts, values })
    }

    pub fn bin(&self, x: f64) -> usize {
        self.cuts.partition_point(|&c| c < x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.bin(x)]
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Additive logit model `intercept + sum_i f_i(x_i)` with centered step
/// shape functions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveModel {
    intercept: f64,
    shapes: Vec<ShapeFunction>,
}

/// Quantile cut points: midpoints between neighbouring distinct values at the
/// `j / bins` quantiles, deduplicated.
fn cut_points(column: &mut [f64], bins: usize) -> Vec<f64> {
    column.sort_by(f64::total_cmp);
    let n = column.len();
    let mut cuts: Vec<f64> = Vec::new();
    for j in 1..bins {
        let k = (j * n + bins / 2) / bins;
        if k == 0 || k >= n {
            continue;
        }
        let (lo, hi) = (column[k - 1], column[k]);
        if lo < hi {
            let mid = 0.5 * (lo + hi);
            let cut = if mid >= hi { lo } else { mid };
            if cuts.last().is_none_or(|&last| cut > last) {
                cuts.push(cut);
            }
        }
    }
    cuts
}

/// Cyclic round-robin boosting of one-feature stumps.
///
/// Each step fits a single split over the feature's bins to the current
/// residuals `y - p` and adds the damped side means to that feature's shape
/// function. After all cycles each shape is centered on the training data and
/// the removed mean moves into the intercept.
pub fn fit_additive(d: &Dataset, config: &AdditiveConfig) -> Result<AdditiveModel, ModelError> {
    if config.bins < 2 {
        return Err(ModelError::Invalid("need at least two bins".into()));
    }
    let n = d.n_rows();
    let p = d.n_features();
    let labels = d.labels();

    let mut shapes = Vec::with_capacity(p);
    let mut bin_of = Vec::with_capacity(p);
    for j in 0..p {
        let mut col = d.features().column(j).to_vec();
        let cuts = cut_points(&mut col, config.bins);
        let shape = ShapeFunction {
            values: vec![0.0; cuts.len() + 1],
            cuts,
        };
        bin_of.push(
            (0..n)
                .map(|i| shape.bin(d.features()[[i, j]]))
                .collect::<Vec<_>>(),
        );
        shapes.push(shape);
    }

    let mut intercept = log_odds(d.positives(), n);
    let mut scores = vec![intercept; n];
    for _ in 0..config.cycles {
        for j in 0..p {
            let k = shapes[j].values.len();
            if k < 2 {
                continue;
            }
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for i in 0..n {
                let r = f64::from(labels[i]) - sigmoid(scores[i]);
                sums[bin_of[j][i]] += r;
                counts[bin_of[j][i]] += 1;
            }
            let total: f64 = sums.iter().sum();
            let mut best: Option<(f64, usize, f64, f64)> = None;
            let (mut ls, mut lc) = (0.0, 0usize);
            for t in 0..k - 1 {
                ls += sums[t];
                lc += counts[t];
                let rc = n - lc;
                if lc == 0 || rc == 0 {
                    continue;
                }
                let rs = total - ls;
                let gain = ls * ls / lc as f64 + rs * rs / rc as f64;
                if best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, t, ls / lc as f64, rs / rc as f64));
                }
            }
            let Some((_, t, left, right)) = best else {
                continue;
            };
            let (left, right) = (config.learning_rate * left, config.learning_rate * right);
            for (b, v) in shapes[j].values.iter_mut().enumerate() {
                *v += if b <= t { left } else { right };
            }
            for i in 0..n {
                scores[i] += if bin_of[j][i] <= t { left } else { right };
            }
        }
    }

    for (shape, bins) in shapes.iter_mut().zip(&bin_of) {
        let mean = bins.iter().map(|&b| shape.values[b]).sum::<f64>() / n as f64;
        for v in &mut shape.values {
            *v -= mean;
        }
        intercept += mean;
    }
    if !intercept.is_finite() || shapes.iter().flat_map(|s| &s.values).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("additive shape functions".into()));
    }
    Ok(AdditiveModel { intercept, shapes })
}

impl AdditiveModel {
    pub fn from_parts(intercept: f64, shapes: Vec<ShapeFunction>) -> Self {
        Self { intercept, shapes }
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn shapes(&self) -> &[ShapeFunction] {
        &self.shapes
    }

    /// Per-feature contributions `f_i(x_i)`.
    pub fn terms(&self, x: &[f64]) -> Vec<f64> {
        self.shapes.iter().zip(x).map(|(s, &v)| s.eval(v)).collect()
    }

    /// Log-odds: intercept plus the sum of [`terms`](Self::terms).
    pub fn score(&self, x: &[f64]) -> f64 {
        self.intercept + self.terms(x).iter().sum::<f64>()
    }
}

impl Classifier for AdditiveModel {
    fn n_features(&self) -> usize {
        self.shapes.len()
    }

    fn predict_proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn threshold_data(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let labels = rows.iter().map(|r| u8::from(r[0] > 0.0)).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn informative_feature_dominates() {
        let d = threshold_data(7);
        let m = fit_additive(&d, &AdditiveConfig::default()).unwrap();
        let mean_abs = |j: usize| {
            (0..d.n_rows())
                .map(|i| m.shapes()[j].eval(d.row(i)[j]).abs())
                .sum::<f64>()
                / d.n_rows() as f64
        };
        assert!(mean_abs(0) > mean_abs(1));
        let acc = m
            .predict(d.features())
            .unwrap()
            .iter()
            .zip(d.labels())
            .filter(|(a, b)| a == b)
            .count();
        assert!(acc as f64 / 300.0 > 0.95);
    }

    #[test]
    fn shapes_are_centered() {
        let d = threshold_data(8);
        let m = fit_additive(&d, &AdditiveConfig::default()).unwrap();
        for (j, shape) in m.shapes().iter().enumerate() {
            let mean = (0..d.n_rows()).map(|i| shape.eval(d.row(i)[j])).sum::<f64>()
                / d.n_rows() as f64;
            assert!(mean.abs() < 1e-12, "feature {j} mean {mean}");
        }
    }

    #[test]
    fn score_reproduces_logit() {
        let d = threshold_data(9);
        let m = fit_additive(&d, &AdditiveConfig::default()).unwrap();
        for i in 0..d.n_rows() {
            let x = d.row(i);
            let decomposed = m.intercept() + m.terms(x).iter().sum::<f64>();
            assert!((decomposed - m.score(x)).abs() < 1e-12);
            let p = m.predict_proba_row(x);
            assert!(((p / (1.0 - p)).ln() - m.score(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn cut_points_increase() {
        let mut col: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let cuts = cut_points(&mut col, 16);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        assert!(cuts.len() <= 6);
        let mut constant = vec![2.0; 10];
        assert!(cut_points(&mut constant, 16).is_empty());
    }

    #[test]
    fn shape_function_bins() {
        let s = ShapeFunction::new(vec![0.0, 1.0], vec![-1.0, 0.5, 2.0]).unwrap();
        assert_eq!(s.eval(-3.0), -1.0);
        assert_eq!(s.eval(0.0), -1.0);
        assert_eq!(s.eval(0.5), 0.5);
        assert_eq!(s.eval(7.0), 2.0);
        assert!(ShapeFunction::new(vec![1.0, 0.0], vec![0.0; 3]).is_err());
    }
}
