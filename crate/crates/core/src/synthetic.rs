//! Seeded synthetic tabular task: 2 numeric + 2 categorical columns with a
//! planted decision-tree structure. Used by the test suite and the bundled
//! fixtures so everything runs with zero downloads.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Column, ColumnKind, ColumnSchema, Dataset, MissingPolicy};
use crate::math;
use crate::trainers::{Tree, TreeEnsemble, TreeNode};

/// The planted splits, as (feature index into [num0, num1], threshold):
/// a depth-3 chain whose leaf signs alternate.
pub const PLANTED_SPLITS: [(usize, f64); 3] = [(0, 0.35), (1, -0.55), (1, -0.15)];

/// Leaf magnitude of the planted tree, on the logit scale.
pub const PLANTED_LEAF_SCALE: f64 = 2.5;

/// Logit of the planted depth-3 tree over the two numeric features.
pub fn planted_tree_logit(x0: f64, x1: f64) -> f64 {
    // Branch tests mirror the tree convention: right iff value > threshold.
    let s = PLANTED_LEAF_SCALE;
    if x0 <= PLANTED_SPLITS[0].1 {
        -s
    } else if x1 <= PLANTED_SPLITS[1].1 {
        s
    } else if x1 <= PLANTED_SPLITS[2].1 {
        -s
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub seed: u64,
    /// Weight of the additive categorical logit contributions; 0 makes the
    /// label a pure function of the numeric features.
    pub cat_signal: f64,
    /// When set, labels are sampled from σ(logit); otherwise label = logit>0.
    pub bernoulli: bool,
    /// Independent label-flip probability applied after generation.
    pub flip_prob: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            rows: 4000,
            seed: 1,
            cat_signal: 0.8,
            bernoulli: true,
            flip_prob: 0.0,
        }
    }
}

const CAT0_VALUES: usize = 8;
const CAT1_VALUES: usize = 6;

fn cat_tables(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xCA7);
    let w0: Vec<f64> = (0..CAT0_VALUES).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w1: Vec<f64> = (0..CAT1_VALUES).map(|_| rng.random_range(-1.0..1.0)).collect();
    (w0, w1)
}

/// Generates the synthetic dataset. Columns: num0, num1 ~ uniform(−1, 1);
/// cat0 ∈ {a0..a7}, cat1 ∈ {b0..b5} uniform; label from the planted tree
/// plus categorical contributions.
pub fn generate(cfg: &SyntheticConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w0, w1) = cat_tables(cfg.seed);
    let mut num0 = Vec::with_capacity(cfg.rows);
    let mut num1 = Vec::with_capacity(cfg.rows);
    let mut cat0 = Vec::with_capacity(cfg.rows);
    let mut cat1 = Vec::with_capacity(cfg.rows);
    let mut labels = Vec::with_capacity(cfg.rows);
    for _ in 0..cfg.rows {
        let x0: f64 = rng.random_range(-1.0..1.0);
        let x1: f64 = rng.random_range(-1.0..1.0);
        let c0 = rng.random_range(0..CAT0_VALUES);
        let c1 = rng.random_range(0..CAT1_VALUES);
        let logit = planted_tree_logit(x0, x1) + cfg.cat_signal * (w0[c0] + w1[c1]);
        let mut y = if cfg.bernoulli {
            (rng.random_range(0.0..1.0) < math::sigmoid(logit)) as u8
        } else {
            (logit > 0.0) as u8
        };
        if cfg.flip_prob > 0.0 && rng.random_range(0.0..1.0) < cfg.flip_prob {
            y = 1 - y;
        }
        num0.push(x0);
        num1.push(x1);
        cat0.push(format!("a{c0}"));
        cat1.push(format!("b{c1}"));
        labels.push(y);
    }
    Dataset::new(
        vec![
            ColumnSchema {
                name: "num0".to_string(),
                kind: ColumnKind::Numeric,
                missing_policy: MissingPolicy::FillZero,
            },
            ColumnSchema {
                name: "num1".to_string(),
                kind: ColumnKind::Numeric,
                missing_policy: MissingPolicy::FillZero,
            },
            ColumnSchema {
                name: "cat0".to_string(),
                kind: ColumnKind::Categorical,
                missing_policy: MissingPolicy::FillZero,
            },
            ColumnSchema {
                name: "cat1".to_string(),
                kind: ColumnKind::Categorical,
                missing_policy: MissingPolicy::FillZero,
            },
        ],
        vec![
            Column::Numeric(num0),
            Column::Numeric(num1),
            Column::Categorical(cat0),
            Column::Categorical(cat1),
        ],
        labels,
    )
    .expect("generator invariants")
}

/// Copy of the dataset with labels flipped independently with probability
/// `prob` (for noisy-subsample experiments).
pub fn flip_labels(ds: &Dataset, prob: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for l in &mut out.labels {
        if rng.random_range(0.0..1.0) < prob {
            *l = 1 - *l;
        }
    }
    out
}

/// Random tree with exactly `leaves` leaves over `dim` features: repeatedly
/// splits a random leaf on a random feature/threshold. Leaf values are
/// uniform(−1, 1).
pub fn random_full_tree(leaves: usize, dim: usize, rng: &mut ChaCha8Rng) -> Tree {
    assert!(leaves >= 1 && dim >= 1);
    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    let mut leaf_ids = vec![0usize];
    while leaf_ids.len() < leaves {
        let pick = rng.random_range(0..leaf_ids.len());
        let id = leaf_ids.swap_remove(pick);
        let left = nodes.len();
        let right = nodes.len() + 1;
        nodes[id] = TreeNode::Internal {
            feature: rng.random_range(0..dim),
            threshold: rng.random_range(-1.0..1.0),
            left,
            right,
        };
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes.push(TreeNode::Leaf { value: 0.0 });
        leaf_ids.push(left);
        leaf_ids.push(right);
    }
    for id in leaf_ids {
        nodes[id] = TreeNode::Leaf {
            value: rng.random_range(-1.0..1.0),
        };
    }
    Tree { nodes, root: 0 }
}

/// Ensemble of `num_trees` random trees with exactly `leaves` leaves each.
pub fn random_full_ensemble(
    num_trees: usize,
    leaves: usize,
    dim: usize,
    base_score: f64,
    seed: u64,
) -> TreeEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TreeEnsemble {
        trees: (0..num_trees)
            .map(|_| random_full_tree(leaves, dim, &mut rng))
            .collect(),
        base_score,
    }
}

/// Random feature rows matching the generator's numeric ranges, for fidelity
/// sweeps over ensembles built by [`random_full_ensemble`].
pub fn random_feature_rows(rows: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn generator_is_deterministic() {
        let cfg = SyntheticConfig {
            rows: 100,
            ..SyntheticConfig::default()
        };
        assert_eq!(generate(&cfg), generate(&cfg));
    }

    #[test]
    fn planted_logit_follows_the_chain() {
        assert_eq!(planted_tree_logit(0.0, 0.0), -PLANTED_LEAF_SCALE);
        assert_eq!(planted_tree_logit(0.5, -0.8), PLANTED_LEAF_SCALE);
        assert_eq!(planted_tree_logit(0.5, -0.3), -PLANTED_LEAF_SCALE);
        assert_eq!(planted_tree_logit(0.5, 0.5), PLANTED_LEAF_SCALE);
    }

    #[test]
    fn random_full_tree_has_exact_leaf_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for leaves in [1, 2, 5, 25, 30] {
            let t = random_full_tree(leaves, 4, &mut rng);
            t.validate().unwrap();
            assert_eq!(t.leaf_count(), leaves);
        }
    }

    proptest! {
        #[test]
        fn leaf_count_is_internal_count_plus_one(
            leaves in 1usize..40,
            dim in 1usize..8,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_full_tree(leaves, dim, &mut rng);
            prop_assert!(t.validate().is_ok());
            prop_assert_eq!(t.leaf_count(), t.internal_count() + 1);
        }

        #[test]
        fn leaf_onehot_has_one_indicator_per_tree(
            trees in 1usize..6,
            leaves in 1usize..10,
            seed in any::<u64>(),
        ) {
            let ens = random_full_ensemble(trees, leaves, 3, 0.0, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v = ens.leaf_onehot(&x);
            prop_assert_eq!(v.len(), trees * leaves);
            prop_assert_eq!(v.iter().sum::<f64>(), trees as f64);
            // Ensemble score decomposes tree by tree.
            let direct: f64 = ens.base_score + ens.trees.iter().map(|t| t.predict(&x)).sum::<f64>();
            prop_assert_eq!(direct, ens.predict(&x));
        }
    }

    #[test]
    fn labels_have_both_classes() {
        let ds = generate(&SyntheticConfig {
            rows: 500,
            ..SyntheticConfig::default()
        });
        let pos: usize = ds.labels.iter().map(|&l| l as usize).sum();
        assert!(pos > 50 && pos < 450, "positives: {pos}");
    }
}
