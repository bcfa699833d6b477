//! Binary decision trees and ensembles: the reference prediction semantics
//! every translated network is checked against.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A rooted binary tree stored as a node arena. Leaves are ordered by node id;
/// that order defines leaf indices for one-hot featurization and translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
}

/// One step on a root→leaf path: which internal node (by ordinal among
/// internal nodes) and whether the path takes the right branch there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub internal_ordinal: usize,
    pub went_right: bool,
}

impl Tree {
    pub fn single_leaf(value: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { value }],
            root: 0,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Node ids of all leaves, in node-id order.
    pub fn leaf_ids(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, TreeNode::Leaf { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// Node ids of all internal nodes, in node-id order.
    pub fn internal_ids(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, TreeNode::Internal { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest feature index referenced by any decision, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Internal { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }

    fn walk(&self, x: &[f64]) -> usize {
        let mut id = self.root;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { .. } => return id,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    // Strict comparison: equality goes left.
                    id = if x[*feature] > *threshold { *right } else { *left };
                }
            }
        }
    }

    /// Value of the leaf reached by `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.walk(x)] {
            TreeNode::Leaf { value } => *value,
            TreeNode::Internal { .. } => unreachable!(),
        }
    }

    /// Ordinal (in leaf-id order) of the leaf reached by `x`.
    pub fn leaf_ordinal(&self, x: &[f64]) -> usize {
        let id = self.walk(x);
        self.leaf_ids().iter().position(|&l| l == id).expect("leaf")
    }

    /// Root→leaf paths in leaf-id order, expressed over internal ordinals.
    pub fn leaf_paths(&self) -> Vec<Vec<PathStep>> {
        let internal = self.internal_ids();
        let ordinal_of = |id: usize| internal.iter().position(|&n| n == id).expect("internal");
        let mut paths: Vec<(usize, Vec<PathStep>)> = Vec::new();
        // Iterative DFS carrying the path so far.
        let mut stack: Vec<(usize, Vec<PathStep>)> = vec![(self.root, Vec::new())];
        while let Some((id, path)) = stack.pop() {
            match &self.nodes[id] {
                TreeNode::Leaf { .. } => paths.push((id, path)),
                TreeNode::Internal { left, right, .. } => {
                    let ord = ordinal_of(id);
                    let mut lp = path.clone();
                    lp.push(PathStep {
                        internal_ordinal: ord,
                        went_right: false,
                    });
                    let mut rp = path;
                    rp.push(PathStep {
                        internal_ordinal: ord,
                        went_right: true,
                    });
                    stack.push((*left, lp));
                    stack.push((*right, rp));
                }
            }
        }
        paths.sort_by_key(|(id, _)| *id);
        paths.into_iter().map(|(_, p)| p).collect()
    }

    /// Structural invariants: single rooted binary tree, every node reachable
    /// exactly once, leaf count = internal count + 1.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.nodes.is_empty() {
            return Err(TrainError::MalformedTree("no nodes".to_string()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() {
                return Err(TrainError::MalformedTree(format!("node id {id} out of range")));
            }
            if seen[id] {
                return Err(TrainError::MalformedTree(format!(
                    "node {id} reachable more than once"
                )));
            }
            seen[id] = true;
            if let TreeNode::Internal { left, right, .. } = &self.nodes[id] {
                stack.push(*left);
                stack.push(*right);
            }
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            return Err(TrainError::MalformedTree(format!("node {id} unreachable")));
        }
        if self.leaf_count() != self.internal_count() + 1 {
            return Err(TrainError::MalformedTree(format!(
                "{} leaves vs {} internal nodes",
                self.leaf_count(),
                self.internal_count()
            )));
        }
        Ok(())
    }
}

/// Boosted ensemble. Learning-rate scaling is already folded into the stored
/// leaf values, so the raw score is just `base_score + sum of tree outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f64,
}

impl TreeEnsemble {
    /// Raw (logit-scale) score: base score plus tree outputs, summed
    /// left-to-right in tree order.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut acc = self.base_score;
        for t in &self.trees {
            acc += t.predict(x);
        }
        acc
    }

    pub fn total_leaves(&self) -> usize {
        self.trees.iter().map(|t| t.leaf_count()).sum()
    }

    /// Concatenated per-tree indicator blocks: within each tree's block the
    /// reached leaf is 1 and everything else 0.
    pub fn leaf_onehot(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_leaves());
        for t in &self.trees {
            let hit = t.leaf_ordinal(x);
            for i in 0..t.leaf_count() {
                out.push(if i == hit { 1.0 } else { 0.0 });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        for t in &self.trees {
            t.validate()?;
        }
        Ok(())
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.trees.iter().filter_map(|t| t.max_feature()).max()
    }
}

/// Test fixture: the worked five-leaf example tree. Leaves carry values
/// 10..50 in leaf-id order; internal nodes in id order split on features
/// (0, 1, 1, 2).
#[cfg(test)]
pub(crate) fn demo_tree() -> Tree {
    use TreeNode::*;
    Tree {
        nodes: vec![
            Internal {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 6,
            },
            Internal {
                feature: 1,
                threshold: -0.2,
                left: 2,
                right: 3,
            },
            Leaf { value: 10.0 },
            Internal {
                feature: 1,
                threshold: 0.7,
                left: 4,
                right: 5,
            },
            Leaf { value: 20.0 },
            Leaf { value: 30.0 },
            Internal {
                feature: 2,
                threshold: 1.5,
                left: 7,
                right: 8,
            },
            Leaf { value: 40.0 },
            Leaf { value: 50.0 },
        ],
        root: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_tree_is_well_formed() {
        let t = demo_tree();
        t.validate().unwrap();
        assert_eq!(t.leaf_count(), 5);
        assert_eq!(t.internal_count(), 4);
    }

    #[test]
    fn predict_follows_right_then_left_path() {
        // Root goes right (x0 > 0.5), then its right child goes left
        // (x2 <= 1.5): the fourth leaf, value 40.
        let t = demo_tree();
        assert_eq!(t.predict(&[0.9, 0.0, 1.0]), 40.0);
        assert_eq!(t.leaf_ordinal(&[0.9, 0.0, 1.0]), 3);
    }

    #[test]
    fn equality_at_threshold_goes_left() {
        let t = demo_tree();
        // x0 == 0.5 exactly: left subtree; x1 == -0.2 exactly: left again.
        assert_eq!(t.predict(&[0.5, -0.2, 0.0]), 10.0);
    }

    #[test]
    fn single_leaf_ignores_input() {
        let t = Tree::single_leaf(7.5);
        assert_eq!(t.predict(&[1.0, 2.0]), 7.5);
        assert_eq!(t.predict(&[]), 7.5);
        t.validate().unwrap();
    }

    #[test]
    fn leaf_paths_match_structure() {
        let t = demo_tree();
        let paths = t.leaf_paths();
        assert_eq!(paths.len(), 5);
        // Fourth leaf: right at the root (ordinal 0), left at the last
        // internal node (ordinal 3).
        assert_eq!(
            paths[3],
            vec![
                PathStep {
                    internal_ordinal: 0,
                    went_right: true
                },
                PathStep {
                    internal_ordinal: 3,
                    went_right: false
                },
            ]
        );
        assert_eq!(paths[0].len(), 2);
        assert_eq!(paths[1].len(), 3);
    }

    #[test]
    fn ensemble_sums_in_tree_order() {
        let ens = TreeEnsemble {
            trees: vec![demo_tree(), Tree::single_leaf(-3.0)],
            base_score: 0.25,
        };
        let x = [0.9, 0.0, 1.0];
        assert_eq!(ens.predict(&x), 0.25 + 40.0 + -3.0);
    }

    #[test]
    fn leaf_onehot_blocks() {
        let ens = TreeEnsemble {
            trees: vec![demo_tree(), Tree::single_leaf(-3.0)],
            base_score: 0.0,
        };
        let v = ens.leaf_onehot(&[0.9, 0.0, 1.0]);
        assert_eq!(v.len(), 6);
        assert_eq!(v.iter().sum::<f64>(), 2.0);
        assert_eq!(v[3], 1.0);
        assert_eq!(v[5], 1.0);
    }

    #[test]
    fn validate_rejects_cycles_and_unreachable() {
        let t = Tree {
            nodes: vec![
                TreeNode::Internal {
                    feature: 0,
                    threshold: 0.0,
                    left: 0,
                    right: 1,
                },
                TreeNode::Leaf { value: 1.0 },
            ],
            root: 0,
        };
        assert!(t.validate().is_err());
    }
}
