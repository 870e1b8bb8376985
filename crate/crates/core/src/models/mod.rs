//! From-scratch binary classifiers.
//!
//! All fits are deterministic given data, configuration and (where the
//! algorithm is randomized) a seed. Fitted models are immutable and `Sync`.

mod additive;
mod boosted;
mod forest;
mod logistic;
mod tree;

pub use additive::{fit_additive, AdditiveConfig, AdditiveModel, ShapeFunction};
pub use boosted::{fit_boosted, BoostedConfig, BoostedModel};
pub use forest::{fit_forest, forest_bootstrap_rows, ForestConfig, ForestModel};
pub use logistic::{fit_logistic, LogisticConfig, LogisticModel};
pub use tree::{fit_tree, DecisionTree, Node, NodeKind, TreeConfig};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("instance width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("fit produced non-finite values: {0}")]
    NonFinite(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_odds(positives: usize, n: usize) -> f64 {
    let p = positives as f64 / n as f64;
    (p / (1.0 - p)).ln()
}

/// A fitted binary classifier.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;

    /// Class-1 probability for one instance. The caller guarantees the width.
    fn predict_proba_row(&self, x: &[f64]) -> f64;

    /// The quantity Shapley explanations attribute. Probability unless a
    /// model overrides it.
    fn explained_output(&self, x: &[f64]) -> f64 {
        self.predict_proba_row(x)
    }

    fn check_width(&self, got: usize) -> Result<(), ModelError> {
        let expected = self.n_features();
        if got == expected {
            Ok(())
        } else {
            Err(ModelError::WidthMismatch { expected, got })
        }
    }

    fn predict_proba(&self, instances: &Array2<f64>) -> Result<Vec<f64>, ModelError> {
        self.check_width(instances.ncols())?;
        Ok(instances
            .rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict_proba_row(s),
                None => self.predict_proba_row(&r.to_vec()),
            })
            .collect())
    }

    /// Hard labels at the 0.5 threshold.
    fn predict(&self, instances: &Array2<f64>) -> Result<Vec<u8>, ModelError> {
        Ok(self
            .predict_proba(instances)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }
}

/// The model families the harness fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Forest,
    Boosted,
    Additive,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
            ModelKind::Boosted => "boosted",
            ModelKind::Additive => "additive",
        }
    }
}

/// Any fitted model produced by the harness.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Boosted(BoostedModel),
    Additive(AdditiveModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Logistic(_) => ModelKind::Logistic,
            FittedModel::Forest(_) => ModelKind::Forest,
            FittedModel::Boosted(_) => ModelKind::Boosted,
            FittedModel::Additive(_) => ModelKind::Additive,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            FittedModel::Logistic(m) => m,
            FittedModel::Forest(m) => m,
            FittedModel::Boosted(m) => m,
            FittedModel::Additive(m) => m,
        }
    }
}

impl Classifier for FittedModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_proba_row(&self, x: &[f64]) -> f64 {
        self.inner().predict_proba_row(x)
    }

    fn explained_output(&self, x: &[f64]) -> f64 {
        self.inner().explained_output(x)
    }
}
