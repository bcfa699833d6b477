//! The fine-tuning loop: seeded shuffled minibatches, periodic validation
//! AUC, best-checkpoint tracking and patience-based early stopping.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::loss_logistic;
use super::{Mode, NetError, NeuralGraph};
use crate::data::Dataset;
use crate::eval::auc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Early stop after this many evaluations without a validation AUC
    /// improvement.
    pub patience: usize,
    pub seed: u64,
    /// Validation cadence, in optimizer steps.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            lr: 1e-3,
            weight_decay: 1e-8,
            max_epochs: 30,
            patience: 10,
            seed: 0,
            eval_every: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub step: u64,
    pub train_loss: f64,
    pub valid_auc: f64,
}

/// Eval- or hard-mode scores for every row of a dataset, in row order.
pub fn predict_scores(
    net: &NeuralGraph,
    ds: &Dataset,
    batch_size: usize,
    mode: Mode,
) -> Result<Vec<f64>, NetError> {
    let mut scores = Vec::with_capacity(ds.rows());
    let rows: Vec<usize> = (0..ds.rows()).collect();
    for chunk in rows.chunks(batch_size.max(1)) {
        let batch = net.preprocessor.encode(ds, chunk)?;
        let (logits, _) = net.forward(&batch, mode, 0)?;
        scores.extend(logits);
    }
    Ok(scores)
}

fn valid_auc(net: &NeuralGraph, valid: &Dataset, batch_size: usize) -> Result<f64, NetError> {
    let scores = predict_scores(net, valid, batch_size, Mode::Eval)?;
    auc(&scores, &valid.labels).map_err(|e| NetError::Eval(alloc::format!("{e}")))
}

fn mean_eval_loss(net: &NeuralGraph, ds: &Dataset, batch_size: usize) -> Result<f64, NetError> {
    let scores = predict_scores(net, ds, batch_size, Mode::Eval)?;
    let labels: Vec<f64> = ds.labels.iter().map(|&l| l as f64).collect();
    Ok(loss_logistic(&scores, &labels).0)
}

/// Splitmix64, used to derive per-step dropout seeds from the train seed.
fn mix(seed: u64, step: u64) -> u64 {
    let mut z = seed ^ step.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Fine-tunes a clone of `net`, returning the best-validation-AUC network and
/// the training history. The input network is untouched.
pub fn finetune(
    net: &NeuralGraph,
    train: &Dataset,
    valid: &Dataset,
    cfg: &TrainConfig,
) -> Result<(NeuralGraph, Vec<HistoryPoint>), NetError> {
    if train.rows() == 0 {
        return Err(NetError::EmptyDataset("train"));
    }
    if valid.rows() == 0 {
        return Err(NetError::EmptyDataset("valid"));
    }
    let mut net = net.clone();
    net.reset_gradients();
    let mut adam = AdamState::new(&net);
    let adam_cfg = AdamConfig::new(cfg.lr, cfg.weight_decay);

    let mut history = Vec::new();
    let initial_auc = valid_auc(&net, valid, cfg.batch_size)?;
    history.push(HistoryPoint {
        step: 0,
        train_loss: mean_eval_loss(&net, train, cfg.batch_size)?,
        valid_auc: initial_auc,
    });
    let mut best_auc = initial_auc;
    let mut best_values: Vec<Vec<f64>> = net.params.iter().map(|p| p.values.clone()).collect();
    let mut evals_since_best = 0usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.rows()).collect();
    let mut step: u64 = 0;

    'epochs: for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            step += 1;
            let batch = net.preprocessor.encode(train, chunk)?;
            let (logits, trace) = net.forward(&batch, Mode::Train, mix(cfg.seed, step))?;
            let (loss, dlogits) = loss_logistic(&logits, &batch.labels);
            if !loss.is_finite() {
                return Err(NetError::Divergence(step));
            }
            net.backward(&trace, &batch, &dlogits)?;
            adam_step(&mut net, &mut adam, &adam_cfg);

            if step.is_multiple_of(cfg.eval_every as u64) {
                let auc_now = valid_auc(&net, valid, cfg.batch_size)?;
                history.push(HistoryPoint {
                    step,
                    train_loss: loss,
                    valid_auc: auc_now,
                });
                if auc_now >= best_auc {
                    // Ties refresh the snapshot (training keeps converging
                    // even when the AUC has saturated) but only a strict
                    // improvement resets the patience counter.
                    let improved = auc_now > best_auc;
                    best_auc = auc_now;
                    for (slot, p) in best_values.iter_mut().zip(&net.params) {
                        slot.clone_from(&p.values);
                    }
                    if improved {
                        evals_since_best = 0;
                    } else {
                        evals_since_best += 1;
                    }
                } else {
                    evals_since_best += 1;
                }
                if evals_since_best >= cfg.patience {
                    break 'epochs;
                }
            }
        }
    }

    for (p, best) in net.params.iter_mut().zip(best_values) {
        p.values = best;
    }
    Ok((net, history))
}
