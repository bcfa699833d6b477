//! Mean binary cross-entropy on raw logits, in the overflow-free form
//! max(z,0) − z·y + ln(1 + exp(−|z|)).

use alloc::vec::Vec;

use crate::math;

/// Returns (mean loss, dLoss/dLogits). The gradient is (σ(z) − y) / N.
pub fn loss_logistic(logits: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), labels.len(), "logits/labels length mismatch");
    let n = logits.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(n);
    for i in 0..n {
        let z = logits[i];
        let y = labels[i];
        let zmax = if z > 0.0 { z } else { 0.0 };
        total += zmax - z * y + math::ln_1p(math::exp(-math::abs(z)));
        grad.push((math::sigmoid(z) - y) / n as f64);
    }
    (total / n as f64, grad)
}
