//! Measure how a classifier's predictive accuracy affects the quality of its
//! feature-importance interpretations.
//!
//! The crate is organized bottom-up:
//!
//! * [`data`] loads CSV datasets, splits them and draws subsample-bootstrap
//!   replicates.
//! * [`models`] holds from-scratch classifiers: logistic regression, a random
//!   forest, gradient-boosted trees and a cyclic-boosted additive model.
//! * [`explain`] turns fitted models into importance scores and rankings
//!   (coefficient magnitude, mean decrease impurity, Shapley values, LIME and
//!   additive self-explanation).
//! * [`rankmetrics`] scores sets of rankings: weighted truncated Kendall-Tau
//!   stability, modal top-3 frequency, F1 and accuracy buckets.
//! * [`harness`] runs the full subsample/bootstrap sweep and aggregates
//!   records into curve, bucket and histogram tables.
//!
//! ```
//! use accinterp::rankmetrics::kendall_tau;
//!
//! let d = kendall_tau(&["A", "B", "C"], &["B", "A", "C"]).unwrap();
//! assert!((d - 1.0 / 3.0).abs() < 1e-15);
//! ```

pub mod data;
pub mod explain;
pub mod harness;
pub mod models;
pub mod rankmetrics;

pub use data::{Dataset, SplitPair, Standardizer};
pub use explain::{ImportanceVector, RankVector};
pub use models::{Classifier, FittedModel, ModelKind};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rank-metrics.md")]
    mod rank_metrics {}
    #[doc = include_str!("../../../book/src/explainers.md")]
    mod explainers {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
