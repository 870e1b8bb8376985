use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeConfig};
use super::{Classifier, ModelError};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features considered per split; `None` means `ceil(sqrt(P))`.
    pub max_features: Option<usize>,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            max_depth: TreeConfig::default().max_depth,
            min_samples_split: TreeConfig::default().min_samples_split,
        }
    }
}

impl ForestConfig {
    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
        }
    }

    pub fn features_per_split(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

/// Bagged Gini trees; the prediction is the mean of tree probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

fn draw_rows(rng: &mut ChaCha8Rng, n_rows: usize) -> Vec<usize> {
    (0..n_rows).map(|_| rng.gen_range(0..n_rows)).collect()
}

/// The bootstrap row sample that tree `tree_index` of a forest fitted with
/// `seed` on `n_rows` rows is trained on.
pub fn forest_bootstrap_rows(seed: u64, tree_index: usize, n_rows: usize) -> Vec<usize> {
    draw_rows(&mut tree_rng(seed, tree_index), n_rows)
}

pub fn fit_forest(d: &Dataset, config: &ForestConfig, seed: u64) -> Result<ForestModel, ModelError> {
    if config.n_trees == 0 {
        return Err(ModelError::Invalid("forest needs at least one tree".into()));
    }
    let k = config.features_per_split(d.n_features());
    let tree_cfg = config.tree_config();
    let trees = (0..config.n_trees)
        .map(|b| {
            let mut rng = tree_rng(seed, b);
            let rows = draw_rows(&mut rng, d.n_rows());
            DecisionTree::fit_classifier(
                d.features(),
                d.labels(),
                &rows,
                &tree_cfg,
                Some((k, &mut rng)),
            )
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: d.n_features(),
    })
}

impl ForestModel {
    pub fn from_trees(trees: Vec<DecisionTree>) -> Result<Self, ModelError> {
        let n_features = trees
            .first()
            .ok_or_else(|| ModelError::Invalid("forest needs at least one tree".into()))?
            .n_features();
        if trees.iter().any(|t| t.n_features() != n_features) {
            return Err(ModelError::Invalid("trees disagree on width".into()));
        }
        Ok(Self { trees, n_features })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.value(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(m: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| vec![(i % 17) as f64, (i * 7 % 5) as f64, (i * 13 % 29) as f64])
            .collect();
        let labels = (0..m).map(|i| u8::from((i % 17) + (i * 7 % 5) > 9)).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn single_full_tree_matches_plain_tree() {
        let d = noisy(80);
        let cfg = ForestConfig {
            n_trees: 1,
            max_features: Some(d.n_features()),
            ..ForestConfig::default()
        };
        let forest = fit_forest(&d, &cfg, 11).unwrap();
        let rows = forest_bootstrap_rows(11, 0, d.n_rows());
        let tree = DecisionTree::fit_classifier(d.features(), d.labels(), &rows, &cfg.tree_config(), None);
        for i in 0..d.n_rows() {
            assert_eq!(forest.predict_proba_row(d.row(i)), tree.value(d.row(i)));
        }
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let d = noisy(60);
        let cfg = ForestConfig {
            n_trees: 7,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&d, &cfg, 3).unwrap();
        for i in 0..d.n_rows() {
            let x = d.row(i);
            let manual: f64 =
                forest.trees().iter().map(|t| t.value(x)).sum::<f64>() / 7.0;
            assert!((forest.predict_proba_row(x) - manual).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let d = noisy(60);
        let cfg = ForestConfig {
            n_trees: 5,
            ..ForestConfig::default()
        };
        assert_eq!(fit_forest(&d, &cfg, 1).unwrap(), fit_forest(&d, &cfg, 1).unwrap());
        assert_ne!(fit_forest(&d, &cfg, 1).unwrap(), fit_forest(&d, &cfg, 2).unwrap());
    }

    #[test]
    fn default_feature_subset() {
        let cfg = ForestConfig::default();
        assert_eq!(cfg.features_per_split(10), 4);
        assert_eq!(cfg.features_per_split(16), 4);
        assert_eq!(cfg.features_per_split(1), 1);
    }
}
