use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeConfig};
use super::{log_odds, sigmoid, Classifier, ModelError};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostedConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for BoostedConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_split: 5,
        }
    }
}

/// First-order gradient boosting on the logistic loss.
///
/// Each round fits a least-squares tree to the residuals `y - p` and adds it
/// with weight `learning_rate`; leaves hold the mean residual.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    initial: f64,
    learning_rate: f64,
    trees: Vec<DecisionTree>,
    n_features: usize,
}

pub fn fit_boosted(d: &Dataset, config: &BoostedConfig) -> Result<BoostedModel, ModelError> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(ModelError::Invalid(format!(
            "learning rate {}",
            config.learning_rate
        )));
    }
    let n = d.n_rows();
    let initial = log_odds(d.positives(), n);
    let tree_cfg = TreeConfig {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
    };
    let rows: Vec<usize> = (0..n).collect();
    let labels = d.labels();
    let mut logits = vec![initial; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.rounds);

    for round in 0..config.rounds {
        for i in 0..n {
            residuals[i] = f64::from(labels[i]) - sigmoid(logits[i]);
        }
        let tree = DecisionTree::fit_regressor(d.features(), labels, &residuals, &rows, &tree_cfg);
        for (i, z) in logits.iter_mut().enumerate() {
            *z += config.learning_rate * tree.value(d.row(i));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(ModelError::NonFinite(format!("boosting round {round}")));
        }
        trees.push(tree);
    }
    Ok(BoostedModel {
        initial,
        learning_rate: config.learning_rate,
        trees,
        n_features: d.n_features(),
    })
}

impl BoostedModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn initial_logit(&self) -> f64 {
        self.initial
    }

    /// Log-odds using only the first `rounds` trees.
    pub fn staged_logit(&self, x: &[f64], rounds: usize) -> f64 {
        self.initial
            + self.learning_rate
                * self.trees[..rounds.min(self.trees.len())]
                    .iter()
                    .map(|t| t.value(x))
                    .sum::<f64>()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.staged_logit(x, self.trees.len())
    }
}

impl Classifier for BoostedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(m: usize, positive_share: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| vec![(i % 11) as f64, (i * 3 % 7) as f64])
            .collect();
        let labels = (0..m).map(|i| u8::from(i % 10 < positive_share)).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn zero_rounds_predicts_base_rate() {
        let cfg = BoostedConfig {
            rounds: 0,
            ..BoostedConfig::default()
        };
        let balanced = dataset(40, 5);
        let m = fit_boosted(&balanced, &cfg).unwrap();
        assert_eq!(m.predict_proba_row(&[3.0, 1.0]), 0.5);

        let skewed = dataset(40, 3);
        let m = fit_boosted(&skewed, &cfg).unwrap();
        assert!((m.predict_proba_row(&[0.0, 0.0]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn training_loss_never_increases() {
        let d = dataset(120, 4);
        let m = fit_boosted(&d, &BoostedConfig::default()).unwrap();
        let loss = |rounds: usize| -> f64 {
            (0..d.n_rows())
                .map(|i| {
                    let p = sigmoid(m.staged_logit(d.row(i), rounds));
                    let y = f64::from(d.labels()[i]);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum::<f64>()
        };
        let mut prev = loss(0);
        for r in 1..=m.trees().len() {
            let cur = loss(r);
            assert!(cur <= prev + 1e-9, "round {r}: {cur} > {prev}");
            prev = cur;
        }
        assert!(prev < loss(0));
    }

    #[test]
    fn trees_respect_depth() {
        let d = dataset(120, 4);
        let m = fit_boosted(&d, &BoostedConfig::default()).unwrap();
        assert!(m.trees().iter().all(|t| t.depth() <= 3));
    }
}
