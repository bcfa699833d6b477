//! Gradient boosting on logistic loss with leaf-wise tree growth and
//! second-order (Newton) leaf values.
//!
//! Determinism contract: exact greedy split search, no row or column
//! subsampling, and fixed tie-breaking (higher gain, then lower feature
//! index, then lower threshold, then lower leaf id across leaves).

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::tree::{Tree, TreeNode};
use super::{TrainError, TreeEnsemble};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtConfig {
    pub num_trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub hessian_floor: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            num_trees: 20,
            max_leaves: 8,
            learning_rate: 0.2,
            min_samples_leaf: 1,
            hessian_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitCand {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Newton leaf objective reduction for a (grad, hess) aggregate.
#[inline]
fn leaf_objective(grad: f64, hess: f64, floor: f64) -> f64 {
    grad * grad / if hess > floor { hess } else { floor }
}

/// Best split of the given rows, or None when no split separates at least
/// `min_samples` rows per side with positive gain.
fn best_split(
    x: &Matrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    cfg: &GbdtConfig,
) -> Option<SplitCand> {
    let mut total_g = 0.0;
    let mut total_h = 0.0;
    for &r in rows {
        total_g += grad[r];
        total_h += hess[r];
    }
    let parent = leaf_objective(total_g, total_h, cfg.hessian_floor);
    let mut best: Option<SplitCand> = None;
    let mut sorted: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
    for f in 0..x.cols() {
        sorted.clear();
        for &r in rows {
            sorted.push((x.get(r, f), grad[r], hess[r]));
        }
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let mut gl = 0.0;
        let mut hl = 0.0;
        for i in 0..sorted.len().saturating_sub(1) {
            gl += sorted[i].1;
            hl += sorted[i].2;
            let (a, b) = (sorted[i].0, sorted[i + 1].0);
            if a == b {
                continue;
            }
            let n_left = i + 1;
            let n_right = sorted.len() - n_left;
            if n_left < cfg.min_samples_leaf || n_right < cfg.min_samples_leaf {
                continue;
            }
            // Midpoint threshold; if rounding lands on the upper value, fall
            // back to the lower one so "x > threshold goes right" still
            // separates the two groups.
            let mut theta = 0.5 * (a + b);
            if theta >= b {
                theta = a;
            }
            let gain = leaf_objective(gl, hl, cfg.hessian_floor)
                + leaf_objective(total_g - gl, total_h - hl, cfg.hessian_floor)
                - parent;
            let better = match best {
                None => gain > 0.0,
                // Strict improvement only: earlier feature / lower threshold
                // wins ties.
                Some(b) => gain > b.gain,
            };
            if better {
                best = Some(SplitCand {
                    gain,
                    feature: f,
                    threshold: theta,
                });
            }
        }
    }
    best
}

struct LeafState {
    node_id: usize,
    rows: Vec<usize>,
    grad_sum: f64,
    hess_sum: f64,
    best: Option<SplitCand>,
}

impl LeafState {
    fn new(
        node_id: usize,
        rows: Vec<usize>,
        x: &Matrix,
        grad: &[f64],
        hess: &[f64],
        cfg: &GbdtConfig,
    ) -> Self {
        let mut g = 0.0;
        let mut h = 0.0;
        for &r in &rows {
            g += grad[r];
            h += hess[r];
        }
        let best = best_split(x, &rows, grad, hess, cfg);
        LeafState {
            node_id,
            rows,
            grad_sum: g,
            hess_sum: h,
            best,
        }
    }
}

fn grow_tree(x: &Matrix, grad: &[f64], hess: &[f64], cfg: &GbdtConfig) -> (Tree, Vec<Vec<usize>>) {
    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    let all_rows: Vec<usize> = (0..x.rows()).collect();
    let mut leaves = vec![LeafState::new(0, all_rows, x, grad, hess, cfg)];

    while leaves.len() < cfg.max_leaves {
        // Leaf with the best candidate gain; ties go to the lower node id
        // (leaves are kept in node-id order).
        let mut pick: Option<(usize, SplitCand)> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(cand) = leaf.best {
                let better = match pick {
                    None => true,
                    Some((_, p)) => cand.gain > p.gain,
                };
                if better {
                    pick = Some((i, cand));
                }
            }
        }
        let Some((idx, cand)) = pick else { break };

        let leaf = leaves.remove(idx);
        let left_id = nodes.len();
        let right_id = nodes.len() + 1;
        nodes[leaf.node_id] = TreeNode::Internal {
            feature: cand.feature,
            threshold: cand.threshold,
            left: left_id,
            right: right_id,
        };
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes.push(TreeNode::Leaf { value: 0.0 });

        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for &r in &leaf.rows {
            if x.get(r, cand.feature) > cand.threshold {
                right_rows.push(r);
            } else {
                left_rows.push(r);
            }
        }
        leaves.push(LeafState::new(left_id, left_rows, x, grad, hess, cfg));
        leaves.push(LeafState::new(right_id, right_rows, x, grad, hess, cfg));
        leaves.sort_by_key(|l| l.node_id);
    }

    // Newton step per leaf, scaled by the learning rate.
    let mut assignments: Vec<Vec<usize>> = Vec::new();
    for leaf in &leaves {
        let denom = if leaf.hess_sum > cfg.hessian_floor {
            leaf.hess_sum
        } else {
            cfg.hessian_floor
        };
        let value = -cfg.learning_rate * leaf.grad_sum / denom;
        nodes[leaf.node_id] = TreeNode::Leaf { value };
    }
    // Leaf-id order must match Tree::leaf_ids.
    let mut by_id: Vec<&LeafState> = leaves.iter().collect();
    by_id.sort_by_key(|l| l.node_id);
    for leaf in by_id {
        assignments.push(leaf.rows.clone());
    }
    (Tree { nodes, root: 0 }, assignments)
}

/// Boosted logistic-loss ensemble. `seed` is reserved for subsampling
/// variants; training is exact and deterministic without it.
pub fn train_gbdt(
    x: &Matrix,
    y: &[u8],
    cfg: &GbdtConfig,
    seed: u64,
) -> Result<TreeEnsemble, TrainError> {
    let _ = seed;
    if x.rows() == 0 || y.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    if x.rows() != y.len() {
        return Err(TrainError::InvalidParam(format!(
            "{} rows vs {} labels",
            x.rows(),
            y.len()
        )));
    }
    if cfg.num_trees < 1 {
        return Err(TrainError::InvalidParam("num_trees must be >= 1".to_string()));
    }
    if cfg.max_leaves < 2 {
        return Err(TrainError::InvalidParam("max_leaves must be >= 2".to_string()));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(TrainError::DegenerateLabels);
    }

    let p = positives as f64 / y.len() as f64;
    let base_score = math::ln(p / (1.0 - p));
    let mut scores = vec![base_score; y.len()];
    let mut trees = Vec::with_capacity(cfg.num_trees);

    for _ in 0..cfg.num_trees {
        let mut grad = vec![0.0; y.len()];
        let mut hess = vec![0.0; y.len()];
        for i in 0..y.len() {
            let p = math::sigmoid(scores[i]);
            grad[i] = p - y[i] as f64;
            hess[i] = p * (1.0 - p);
        }
        let (tree, assignments) = grow_tree(x, &grad, &hess, cfg);
        let leaf_ids = tree.leaf_ids();
        for (ordinal, rows) in assignments.iter().enumerate() {
            let value = match tree.nodes[leaf_ids[ordinal]] {
                TreeNode::Leaf { value } => value,
                TreeNode::Internal { .. } => unreachable!(),
            };
            for &r in rows {
                scores[r] += value;
            }
        }
        trees.push(tree);
    }

    Ok(TreeEnsemble { trees, base_score })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(vals: &[f64]) -> Matrix {
        Matrix::from_vec(vals.len(), 1, vals.to_vec())
    }

    /// Independent oracle: evaluate the Newton gain at every midpoint of a
    /// 1-D feature and return the argmax threshold.
    fn brute_force_best_threshold(xs: &[f64], grad: &[f64], hess: &[f64], floor: f64) -> f64 {
        let mut vals: Vec<f64> = xs.to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        let obj = |g: f64, h: f64| g * g / h.max(floor);
        let (tg, th) = (grad.iter().sum::<f64>(), hess.iter().sum::<f64>());
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for w in vals.windows(2) {
            let theta = 0.5 * (w[0] + w[1]);
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..xs.len() {
                if xs[i] <= theta {
                    gl += grad[i];
                    hl += hess[i];
                }
            }
            let gain = obj(gl, hl) + obj(tg - gl, th - hl) - obj(tg, th);
            if gain > best.0 {
                best = (gain, theta);
            }
        }
        best.1
    }

    #[test]
    fn separates_one_dimensional_classes() {
        let xs = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
        let y = [0u8, 0, 0, 1, 1, 1];
        let cfg = GbdtConfig {
            num_trees: 1,
            max_leaves: 2,
            learning_rate: 1.0,
            ..GbdtConfig::default()
        };
        let ens = train_gbdt(&column(&xs), &y, &cfg, 0).unwrap();
        let tree = &ens.trees[0];
        let theta = match tree.nodes[tree.root] {
            TreeNode::Internal { threshold, .. } => threshold,
            _ => panic!("expected a split"),
        };
        assert!(theta > 0.3 && theta < 0.7, "theta {theta} outside class gap");

        // Oracle agreement on the first-round gradients.
        let p = math::sigmoid(ens.base_score);
        let grad: Vec<f64> = y.iter().map(|&l| p - l as f64).collect();
        let hess = vec![p * (1.0 - p); y.len()];
        let oracle = brute_force_best_threshold(&xs, &grad, &hess, cfg.hessian_floor);
        assert_eq!(theta, oracle);

        // Leaf signs follow the classes.
        assert!(ens.predict(&[0.2]) < 0.0);
        assert!(ens.predict(&[0.8]) > 0.0);
    }

    #[test]
    fn tree_and_leaf_bounds_hold() {
        // Noisy 2-D task; every tree respects the leaf budget.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let a = (i % 17) as f64 / 17.0;
            let b = (i % 23) as f64 / 23.0;
            rows.push(vec![a, b]);
            y.push(if a + 0.3 * b > 0.55 { 1u8 } else { 0u8 });
        }
        let x = Matrix::from_rows(&rows);
        let cfg = GbdtConfig {
            num_trees: 7,
            max_leaves: 5,
            learning_rate: 0.3,
            ..GbdtConfig::default()
        };
        let ens = train_gbdt(&x, &y, &cfg, 0).unwrap();
        assert_eq!(ens.trees.len(), 7);
        for t in &ens.trees {
            t.validate().unwrap();
            assert!(t.leaf_count() <= 5);
            assert_eq!(t.leaf_count(), t.internal_count() + 1);
        }
    }

    #[test]
    fn rejects_degenerate_labels() {
        let x = column(&[1.0, 2.0, 3.0]);
        let err = train_gbdt(&x, &[1, 1, 1], &GbdtConfig::default(), 0).unwrap_err();
        assert_eq!(err, TrainError::DegenerateLabels);
    }

    #[test]
    fn base_score_is_label_log_odds() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let ens = train_gbdt(
            &x,
            &[0, 0, 0, 1],
            &GbdtConfig {
                num_trees: 1,
                ..GbdtConfig::default()
            },
            0,
        )
        .unwrap();
        assert!((ens.base_score - math::ln(0.25 / 0.75)).abs() < 1e-15);
    }
}
