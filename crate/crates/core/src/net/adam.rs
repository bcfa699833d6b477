//! Bias-corrected Adam with decoupled weight decay. Only trainable
//! parameters are ever touched.

use alloc::vec;
use alloc::vec::Vec;

use super::NeuralGraph;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// Per-parameter first/second moments plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(net: &NeuralGraph) -> Self {
        AdamState {
            first: net.params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: net.params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One optimizer step from the gradients currently stored in the registry.
/// Decay is decoupled: values -= lr*wd*values before the Adam update.
pub fn adam_step(net: &mut NeuralGraph, state: &mut AdamState, cfg: &AdamConfig) {
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t);
    for (pi, p) in net.params.iter_mut().enumerate() {
        if !p.trainable {
            continue;
        }
        let m = &mut state.first[pi];
        let v = &mut state.second[pi];
        for i in 0..p.values.len() {
            let g = p.grad[i];
            p.values[i] -= cfg.lr * cfg.weight_decay * p.values[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p.values[i] -= cfg.lr * m_hat / (math::sqrt(v_hat) + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{FrozenPreprocessor, LayerOp, ValueRef};

    fn one_param_net(values: Vec<f64>, trainable: bool) -> NeuralGraph {
        let mut net = NeuralGraph::new(FrozenPreprocessor {
            numeric_slots: vec![vec![alloc::string::String::from("x")]],
            key_slots: vec![],
        });
        let n = values.len();
        let w = net.add_param("w", 1, n, values, trainable, n);
        let out = net.add_layer(
            "dense",
            LayerOp::Dense {
                weights: w,
                bias: None,
            },
            vec![ValueRef::NumericInput(0)],
            1,
        );
        net.output = out;
        net
    }

    #[test]
    fn first_step_moves_by_lr_signwise() {
        let mut net = one_param_net(vec![0.0, 0.0], true);
        net.params[0].grad = vec![0.5, -2.0];
        let mut st = AdamState::new(&net);
        let cfg = AdamConfig::new(1e-2, 0.0);
        adam_step(&mut net, &mut st, &cfg);
        // From zero moments the update direction is -lr * g/(|g| + eps').
        assert!((net.params[0].values[0] + 1e-2).abs() < 1e-6);
        assert!((net.params[0].values[1] - 1e-2).abs() < 1e-6);
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut net = one_param_net(vec![1.25, -0.5], true);
        net.params[0].grad = vec![0.0, 0.0];
        let before = net.params[0].values.clone();
        let mut st = AdamState::new(&net);
        adam_step(&mut net, &mut st, &AdamConfig::new(1e-3, 0.0));
        assert_eq!(net.params[0].values, before);
    }

    #[test]
    fn non_trainable_param_never_moves() {
        let mut net = one_param_net(vec![1.0, 2.0], false);
        net.params[0].grad = vec![10.0, -10.0];
        let before = net.params[0].values.clone();
        let mut st = AdamState::new(&net);
        for _ in 0..100 {
            adam_step(&mut net, &mut st, &AdamConfig::new(1e-1, 1e-2));
        }
        assert_eq!(net.params[0].values, before);
    }

    #[test]
    fn zero_lr_is_bit_identity() {
        let mut net = one_param_net(vec![0.3], true);
        net.params[0].grad = vec![1.0];
        let before = net.params[0].values.clone();
        let mut st = AdamState::new(&net);
        adam_step(&mut net, &mut st, &AdamConfig::new(0.0, 1e-2));
        assert_eq!(net.params[0].values, before);
    }
}
