//! Metrics and verification: rank-based AUC, pipeline/network fidelity,
//! finite-difference gradient audits and parameter counting.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::math;
use crate::net::{loss_logistic, Mode, NetBatch, NetError, NeuralGraph};
use crate::pipeline::{GraphError, Pipeline};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("scores and labels differ in length")]
    LengthMismatch,
    #[error("gradient check requires a differentiable mode (hard mode given)")]
    NonDifferentiableMode,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// ROC AUC in the Mann–Whitney formulation, with average ranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch);
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // Average rank over the tie group [i, j], 1-based ranks.
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Agreement between a pipeline and its warm translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub rows_checked: usize,
    /// Rows (outside the margin) where the hard-mode logit differs from the
    /// pipeline score by more than 1e-9 relative.
    pub hard_mismatches: usize,
    pub max_soft_abs_deviation: f64,
    /// Smallest distance of any checked input to a decision threshold.
    pub min_margin_seen: f64,
    /// Rows within `margin` of a threshold: reported, not counted as
    /// mismatches.
    pub excluded_rows: usize,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    math::abs(a - b) / math::abs(a).max(math::abs(b)).max(1.0)
}

/// Compares hard-mode network output against the reference pipeline on every
/// row. Rows closer than `margin` to a decision threshold are excluded from
/// the mismatch count (boundary behaviour is ill-defined there) but reported.
pub fn fidelity_check(
    pipeline: &Pipeline,
    net: &NeuralGraph,
    rows: &Dataset,
    margin: f64,
) -> Result<FidelityReport, EvalError> {
    let mut report = FidelityReport {
        rows_checked: 0,
        hard_mismatches: 0,
        max_soft_abs_deviation: 0.0,
        min_margin_seen: f64::INFINITY,
        excluded_rows: 0,
    };
    let all: Vec<usize> = (0..rows.rows()).collect();
    for chunk in all.chunks(1024) {
        let batch = net.preprocessor.encode(rows, chunk)?;
        let (hard, trace) = net.forward(&batch, Mode::Hard, 0)?;
        let (soft, _) = net.forward(&batch, Mode::Eval, 0)?;
        let margins = trace.min_decision_margin();
        for (bi, &r) in chunk.iter().enumerate() {
            let expected = pipeline.predict(rows, r)?;
            report.rows_checked += 1;
            if margins[bi] < report.min_margin_seen {
                report.min_margin_seen = margins[bi];
            }
            let soft_dev = math::abs(soft[bi] - expected);
            if soft_dev > report.max_soft_abs_deviation {
                report.max_soft_abs_deviation = soft_dev;
            }
            if margins[bi] <= margin {
                report.excluded_rows += 1;
            } else if rel_diff(hard[bi], expected) > 1e-9 {
                report.hard_mismatches += 1;
            }
        }
    }
    Ok(report)
}

/// Central-difference audit of the analytic gradients on `sample` randomly
/// chosen trainable coordinates. Returns the maximum relative error with the
/// denominator floored at 1e-12.
pub fn gradient_check(
    net: &NeuralGraph,
    batch: &NetBatch,
    mode: Mode,
    h: f64,
    sample: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if mode == Mode::Hard {
        return Err(EvalError::NonDifferentiableMode);
    }
    let mut net = net.clone();
    // Fixed dropout seed: train-mode checks differentiate through one mask.
    let dropout_seed = 7;
    let (logits, trace) = net.forward(batch, mode, dropout_seed)?;
    let (_, dlogits) = loss_logistic(&logits, &batch.labels);
    net.backward(&trace, batch, &dlogits)?;

    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (pi, p) in net.params.iter().enumerate() {
        if p.trainable {
            for i in 0..p.values.len() {
                coords.push((pi, i));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    coords.shuffle(&mut rng);
    coords.truncate(sample);

    let mut max_rel = 0.0;
    for (pi, i) in coords {
        let analytic = net.params[pi].grad[i];
        let original = net.params[pi].values[i];

        net.params[pi].values[i] = original + h;
        let (lp, _) = net.forward(batch, mode, dropout_seed)?;
        let (loss_plus, _) = loss_logistic(&lp, &batch.labels);

        net.params[pi].values[i] = original - h;
        let (lm, _) = net.forward(batch, mode, dropout_seed)?;
        let (loss_minus, _) = loss_logistic(&lm, &batch.labels);

        net.params[pi].values[i] = original;
        let numeric = (loss_plus - loss_minus) / (2.0 * h);
        let rel = math::abs(analytic - numeric)
            / math::abs(analytic).max(math::abs(numeric)).max(1e-12);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParamCount {
    pub layer: String,
    pub trainable: usize,
    pub total: usize,
}

/// Exact parameter counts, per layer and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCount {
    pub per_layer: Vec<LayerParamCount>,
    pub total_trainable: usize,
    pub total_all: usize,
}

pub fn count_parameters(net: &NeuralGraph) -> ParamCount {
    use crate::net::LayerOp;
    let mut per_layer = Vec::new();
    let mut attributed = alloc::vec![false; net.params.len()];
    for layer in &net.layers {
        let ids: Vec<usize> = match &layer.op {
            LayerOp::Dense { weights, bias } => {
                let mut v = alloc::vec![*weights];
                v.extend(bias.iter().copied());
                v
            }
            LayerOp::Affine { scale, bias } => alloc::vec![*scale, *bias],
            LayerOp::Embedding { table, .. } => alloc::vec![*table],
            LayerOp::TreeBlock {
                decision_weights,
                decision_bias,
                conjunction_weights,
                conjunction_bias,
                ..
            } => alloc::vec![
                *decision_weights,
                *decision_bias,
                *conjunction_weights,
                *conjunction_bias
            ],
            _ => Vec::new(),
        };
        if ids.is_empty() {
            continue;
        }
        let mut count = LayerParamCount {
            layer: layer.id.clone(),
            trainable: 0,
            total: 0,
        };
        for id in ids {
            attributed[id] = true;
            let p = &net.params[id];
            count.total += p.len();
            if p.trainable {
                count.trainable += p.len();
            }
        }
        per_layer.push(count);
    }
    // Parameters not referenced by any layer (should not happen) still count.
    for (pi, p) in net.params.iter().enumerate() {
        if !attributed[pi] {
            per_layer.push(LayerParamCount {
                layer: p.name.clone(),
                trainable: if p.trainable { p.len() } else { 0 },
                total: p.len(),
            });
        }
    }
    let total_trainable = net
        .params
        .iter()
        .filter(|p| p.trainable)
        .map(|p| p.len())
        .sum();
    let total_all = net.params.iter().map(|p| p.len()).sum();
    ParamCount {
        per_layer,
        total_trainable,
        total_all,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n²) pairwise oracle: P(score_pos > score_neg) + 0.5 P(tie).
    fn auc_pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_ordering_gives_one() {
        let scores = [0.1, 0.2, 0.7, 0.9];
        let labels = [0, 0, 1, 1];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_give_half() {
        let scores = [0.5; 6];
        let labels = [0, 1, 0, 1, 0, 1];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn six_point_fixture_with_tie_matches_oracle() {
        let scores = [0.2, 0.6, 0.6, 0.8, 0.1, 0.9];
        let labels = [0, 1, 0, 1, 0, 1];
        let fast = auc(&scores, &labels).unwrap();
        let slow = auc_pairwise(&scores, &labels);
        assert!((fast - slow).abs() < 1e-15, "{fast} vs {slow}");
    }

    #[test]
    fn single_class_is_an_error() {
        assert_eq!(auc(&[0.1, 0.2], &[1, 1]).unwrap_err(), EvalError::SingleClass);
    }
}
