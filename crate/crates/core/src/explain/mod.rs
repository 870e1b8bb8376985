//! Feature-explanation methods: importance scores and the rankings derived
//! from them.
//!
//! | model      | method                    | scope          |
//! |------------|---------------------------|----------------|
//! | logistic   | coefficient magnitude     | global + local |
//! | tree-based | mean decrease impurity    | global         |
//! | any        | Shapley values            | global + local |
//! | any        | LIME                      | local          |
//! | additive   | shape-function terms      | global + local |
//!
//! LIME has no global form: local surrogates are not additive and are not
//! aggregated.

mod additive;
mod lime;
mod mdi;
mod rcm;
mod shap;

pub use additive::{additive_global, additive_local};
pub use lime::{lime_local, LimeConfig, LimeExplanation, MIN_LIME_SAMPLES};
pub use mdi::{mdi_global, TreeEnsemble};
pub use rcm::{rcm_global, rcm_local};
pub use shap::{
    shap_exact, shap_global, shap_global_from_local, shap_local, shap_permutations, shap_sampled,
    ShapleyExplanation, ShapleyMode, DEFAULT_EXACT_CAP,
};

use std::collections::HashSet;

use thiserror::Error;

use crate::models::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("{p} features exceeds the exact Shapley cap of {cap}")]
    TooManyFeatures { p: usize, cap: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("no instances to explain")]
    NoInstances,
    #[error("all perturbation samples are identical")]
    DegenerateSamples,
    #[error("invalid explainer setting: {0}")]
    Invalid(String),
    #[error("non-finite importance score for feature {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What an importance vector describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Global,
    /// Explanation of one instance, identified by the caller.
    Local(usize),
}

/// Non-negative importance per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    scores: Vec<f64>,
    scope: Scope,
}

impl ImportanceVector {
    /// Takes absolute values of `scores`; rejects non-finite entries.
    pub fn new(scores: Vec<f64>, scope: Scope) -> Result<Self, ExplainError> {
        if let Some(j) = scores.iter().position(|s| !s.is_finite()) {
            return Err(ExplainError::NonFinite(j));
        }
        Ok(Self {
            scores: scores.into_iter().map(f64::abs).collect(),
            scope,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn ranking(&self) -> RankVector {
        RankVector::from_scores(&self.scores)
    }
}

/// Feature indices ordered from most to least important.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn new(indices: Vec<usize>) -> Result<Self, ExplainError> {
        let mut seen = HashSet::with_capacity(indices.len());
        if let Some(&dup) = indices.iter().find(|&&i| !seen.insert(i)) {
            return Err(ExplainError::Invalid(format!("feature {dup} ranked twice")));
        }
        Ok(Self(indices))
    }

    /// Descending score; equal scores keep ascending feature index.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self(idx)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.0[..k.min(self.0.len())]
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl AsRef<[usize]> for RankVector {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}
