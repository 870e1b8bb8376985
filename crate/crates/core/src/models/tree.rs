use ndarray::Array2;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ModelError};
use crate::data::Dataset;

/// Smallest impurity decrease accepted for a split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_split: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// Class-1 probability for classification trees, additive output for
    /// boosting trees.
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// One tree node. `impurity` is the Gini impurity of the training labels
/// that reached the node; `n_rows` counts them (bootstrap duplicates included).
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub n_rows: usize,
    pub impurity: f64,
    pub kind: NodeKind,
}

impl Node {
    pub fn leaf(value: f64, n_rows: usize, impurity: f64) -> Self {
        Self {
            n_rows,
            impurity,
            kind: NodeKind::Leaf { value },
        }
    }

    pub fn split(
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_rows: usize,
        impurity: f64,
    ) -> Self {
        Self {
            n_rows,
            impurity,
            kind: NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            },
        }
    }
}

/// Binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

fn gini(n: usize, positives: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = positives / n as f64;
    2.0 * p * (1.0 - p)
}

enum Target<'a> {
    Class,
    Residual(&'a [f64]),
}

struct Builder<'a> {
    x: &'a [f64],
    width: usize,
    labels: &'a [u8],
    target: Target<'a>,
    config: TreeConfig,
    sampling: Option<(usize, &'a mut ChaCha8Rng)>,
    nodes: Vec<Node>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn value(&self, row: usize) -> f64 {
        match self.target {
            Target::Class => f64::from(self.labels[row]),
            Target::Residual(r) => r[row],
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match &mut self.sampling {
            Some((k, rng)) if *k < self.width => {
                let mut feats = sample(*rng, self.width, *k).into_vec();
                feats.sort_unstable();
                feats
            }
            _ => (0..self.width).collect(),
        }
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let positives = rows.iter().filter(|&&i| self.labels[i] == 1).count() as f64;
        let impurity = gini(n, positives);
        let sum: f64 = rows.iter().map(|&i| self.value(i)).sum();
        let leaf_value = if n == 0 { 0.0 } else { sum / n as f64 };

        let id = self.nodes.len();
        self.nodes.push(Node::leaf(leaf_value, n, impurity));

        let pure = match self.target {
            Target::Class => impurity == 0.0,
            Target::Residual(_) => false,
        };
        if depth >= self.config.max_depth || n < self.config.min_samples_split.max(2) || pure {
            return id;
        }
        let Some(best) = self.best_split(rows, positives, sum) else {
            return id;
        };

        let width = self.width;
        let x = self.x;
        let cut = partition(rows, |&i| x[i * width + best.feature] <= best.threshold);
        let (l, r) = rows.split_at_mut(cut);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id].kind = NodeKind::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize], positives: f64, sum: f64) -> Option<Candidate> {
        let n = rows.len();
        let nf = n as f64;
        let parent_gini = gini(n, positives);
        let mut best: Option<Candidate> = None;
        let mut sorted: Vec<(f64, f64, f64)> = Vec::with_capacity(n);

        for feature in self.candidate_features() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| {
                (
                    self.x[i * self.width + feature],
                    self.value(i),
                    f64::from(self.labels[i]),
                )
            }));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_sum = 0.0;
            let mut left_pos = 0.0;
            for k in 0..n - 1 {
                left_sum += sorted[k].1;
                left_pos += sorted[k].2;
                let (lo, hi) = (sorted[k].0, sorted[k + 1].0);
                if lo >= hi {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let gain = match self.target {
                    Target::Class => {
                        parent_gini
                            - (nl as f64 / nf) * gini(nl, left_pos)
                            - (nr as f64 / nf) * gini(nr, positives - left_pos)
                    }
                    Target::Residual(_) => {
                        let right_sum = sum - left_sum;
                        // SSE reduction, scaled per row
                        (left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64
                            - sum * sum / nf)
                            / nf
                    }
                };
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        gain,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

/// Stable-order partition: elements satisfying `pred` first. Returns the split point.
fn partition(rows: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|i| pred(i));
    let cut = yes.len();
    yes.extend(no);
    rows.copy_from_slice(&yes);
    cut
}

fn flat_features(x: &Array2<f64>) -> &[f64] {
    x.as_slice()
        .expect("feature matrices are kept in standard layout")
}

impl DecisionTree {
    /// Greedy CART with Gini impurity on the rows listed in `rows`.
    ///
    /// With `feature_sampling = Some((k, rng))` each split considers a random
    /// subset of `k` features; otherwise all features are scanned. Ties go to
    /// the lowest feature index, then the lowest threshold.
    pub fn fit_classifier(
        x: &Array2<f64>,
        labels: &[u8],
        rows: &[usize],
        config: &TreeConfig,
        feature_sampling: Option<(usize, &mut ChaCha8Rng)>,
    ) -> Self {
        let mut b = Builder {
            x: flat_features(x),
            width: x.ncols(),
            labels,
            target: Target::Class,
            config: *config,
            sampling: feature_sampling,
            nodes: Vec::new(),
        };
        let mut rows = rows.to_vec();
        b.build(&mut rows, 0);
        Self {
            nodes: b.nodes,
            n_features: x.ncols(),
        }
    }

    /// Least-squares regression tree on `targets`, used by gradient boosting.
    /// Node impurities still record the Gini impurity of `labels`.
    pub fn fit_regressor(
        x: &Array2<f64>,
        labels: &[u8],
        targets: &[f64],
        rows: &[usize],
        config: &TreeConfig,
    ) -> Self {
        let mut b = Builder {
            x: flat_features(x),
            width: x.ncols(),
            labels,
            target: Target::Residual(targets),
            config: *config,
            sampling: None,
            nodes: Vec::new(),
        };
        let mut rows = rows.to_vec();
        b.build(&mut rows, 0);
        Self {
            nodes: b.nodes,
            n_features: x.ncols(),
        }
    }

    /// Assembles a tree from explicit nodes, checking child indices and thresholds.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::Invalid("tree without nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if let NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } = node.kind
            {
                if feature >= n_features || !threshold.is_finite() {
                    return Err(ModelError::Invalid(format!("bad split at node {i}")));
                }
                if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                    return Err(ModelError::Invalid(format!("bad children at node {i}")));
                }
            }
        }
        Ok(Self { nodes, n_features })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Split { .. }))
            .count()
    }

    /// Leaf value reached by `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i].kind {
                NodeKind::Leaf { value } => return value,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Per-feature Gini decrease weighted by the fraction of root rows reaching
    /// each split. Not normalized.
    pub fn impurity_decrease(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        let total = self.nodes[0].n_rows.max(1) as f64;
        for node in &self.nodes {
            if let NodeKind::Split {
                feature,
                left,
                right,
                ..
            } = node.kind
            {
                let n = node.n_rows.max(1) as f64;
                let (l, r) = (&self.nodes[left], &self.nodes[right]);
                let children =
                    (l.n_rows as f64 / n) * l.impurity + (r.n_rows as f64 / n) * r.impurity;
                out[feature] += (n / total) * (node.impurity - children);
            }
        }
        out
    }
}

impl Classifier for DecisionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_row(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
}

pub fn fit_tree(d: &Dataset, config: &TreeConfig) -> DecisionTree {
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    DecisionTree::fit_classifier(d.features(), d.labels(), &rows, config, None)
}
