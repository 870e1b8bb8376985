use super::{ImportanceVector, Scope};
use crate::models::{BoostedModel, Classifier, DecisionTree, ForestModel};

/// Models made of decision trees.
pub trait TreeEnsemble {
    fn trees(&self) -> &[DecisionTree];
    fn n_features(&self) -> usize;
}

impl TreeEnsemble for DecisionTree {
    fn trees(&self) -> &[DecisionTree] {
        std::slice::from_ref(self)
    }

    fn n_features(&self) -> usize {
        Classifier::n_features(self)
    }
}

impl TreeEnsemble for ForestModel {
    fn trees(&self) -> &[DecisionTree] {
        ForestModel::trees(self)
    }

    fn n_features(&self) -> usize {
        Classifier::n_features(self)
    }
}

impl TreeEnsemble for BoostedModel {
    fn trees(&self) -> &[DecisionTree] {
        BoostedModel::trees(self)
    }

    fn n_features(&self) -> usize {
        Classifier::n_features(self)
    }
}

/// Mean decrease in Gini impurity.
///
/// Each split contributes `(n_node / n_root) * (gini_node - weighted child
/// gini)` to its feature. Per-tree totals are averaged over trees and the
/// result normalized to sum to one; a model without splits gets all zeros.
pub fn mdi_global<M: TreeEnsemble + ?Sized>(m: &M) -> ImportanceVector {
    let mut totals = vec![0.0; m.n_features()];
    let trees = m.trees();
    for tree in trees {
        for (t, d) in totals.iter_mut().zip(tree.impurity_decrease()) {
            *t += d;
        }
    }
    let n_trees = trees.len().max(1) as f64;
    for t in &mut totals {
        *t /= n_trees;
    }
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        for t in &mut totals {
            *t /= sum;
        }
    }
    ImportanceVector::new(totals, Scope::Global).expect("impurities are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Node;

    /// Depth-1 tree on `feature` splitting 10 rows (5 positive) perfectly.
    fn stump(feature: usize, n_features: usize) -> DecisionTree {
        DecisionTree::from_nodes(
            vec![
                Node::split(feature, 0.5, 1, 2, 10, 0.5),
                Node::leaf(0.0, 5, 0.0),
                Node::leaf(1.0, 5, 0.0),
            ],
            n_features,
        )
        .unwrap()
    }

    #[test]
    fn single_split_gets_everything() {
        let v = mdi_global(&stump(3, 5));
        assert_eq!(v.scores(), [0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn stump_forest_splits_credit() {
        let forest = ForestModel::from_trees(vec![
            stump(0, 2),
            stump(1, 2),
            stump(0, 2),
            stump(1, 2),
        ])
        .unwrap();
        assert_eq!(mdi_global(&forest).scores(), [0.5, 0.5]);
    }

    #[test]
    fn weights_by_node_share() {
        // root on feature 0 (gain 0.5 - 0.25 = 0.25 at weight 1); right child on
        // feature 1 (gain 0.5 at weight 0.5) -> raw [0.25, 0.25]
        let t = DecisionTree::from_nodes(
            vec![
                Node::split(0, 0.0, 1, 2, 8, 0.5),
                Node::leaf(0.0, 4, 0.0),
                Node::split(1, 0.0, 3, 4, 4, 0.5),
                Node::leaf(0.0, 2, 0.0),
                Node::leaf(1.0, 2, 0.0),
            ],
            2,
        )
        .unwrap();
        assert_eq!(t.impurity_decrease(), vec![0.25, 0.25]);
        assert_eq!(mdi_global(&t).scores(), [0.5, 0.5]);
    }

    #[test]
    fn no_splits_is_all_zero() {
        let leaf = DecisionTree::from_nodes(vec![Node::leaf(1.0, 4, 0.0)], 3).unwrap();
        assert_eq!(mdi_global(&leaf).scores(), [0.0; 3]);
    }
}
