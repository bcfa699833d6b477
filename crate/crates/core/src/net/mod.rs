//! Differentiable runtime: the layer vocabulary with forward/backward,
//! logistic loss, Adam with decoupled weight decay, and the fine-tuning loop.
//!
//! A [`NeuralGraph`] is a topologically ordered list of layers over a flat
//! parameter registry. Raw dataset rows pass through a frozen (non-trainable,
//! non-differentiable) preprocessor that gathers numeric columns and maps
//! categorical values to embedding keys; everything after that boundary is
//! differentiable.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{hash_category, DataError, Dataset};
use crate::linalg::Matrix;
use crate::math;
use crate::trainers::Vocab;

pub mod adam;
pub mod loss;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::loss_logistic;
pub use train::{finetune, predict_scores, HistoryPoint, TrainConfig};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NetError {
    #[error("shape mismatch at layer `{layer}`: {detail}")]
    Shape { layer: String, detail: String },
    #[error("backward requires a train- or eval-mode trace; hard mode is non-differentiable")]
    NonDifferentiable,
    #[error("divergence at step {0}: non-finite loss")]
    Divergence(u64),
    #[error("empty {0} dataset")]
    EmptyDataset(&'static str),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("evaluation failed: {0}")]
    Eval(String),
}

pub type ParamId = usize;

/// One named tensor in the flat registry. The gradient buffer is transient
/// state (skipped by serialization) and zeroed at the start of backward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
    pub trainable: bool,
    /// Fan-in used for cold (re)initialization bounds.
    pub fan_in: usize,
}

impl Parameter {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn zero_grad(&mut self) {
        if self.grad.len() != self.values.len() {
            self.grad = vec![0.0; self.values.len()];
        } else {
            self.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

/// How an embedding layer treats rows whose category has no table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Fixed all-zero virtual row (one-hot / hash semantics).
    ZeroVector,
    /// Fixed uniform 1/dim virtual row (topic-distribution semantics).
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Sigmoid,
    Relu,
}

/// A float value in the graph: a numeric input slot or a previous layer's
/// output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueRef {
    NumericInput(usize),
    Layer(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum LayerOp {
    /// y = W x (+ b). Weights are (out × in).
    Dense {
        weights: ParamId,
        bias: Option<ParamId>,
    },
    /// Elementwise y = scale ⊙ x + bias (diagonal dense).
    Affine { scale: ParamId, bias: ParamId },
    /// Row lookup into a table keyed by the preprocessor's key slot.
    Embedding {
        table: ParamId,
        key_slot: usize,
        oov: OovPolicy,
    },
    /// Two hidden layers translated from one decision tree; outputs the leaf
    /// activation vector. Decision pre-activations are x[i]−θ shaped by the
    /// decision weights/bias; conjunction units gate root→leaf paths.
    TreeBlock {
        decision_weights: ParamId,
        decision_bias: ParamId,
        conjunction_weights: ParamId,
        conjunction_bias: ParamId,
        gamma_decision: f64,
        gamma_conjunction: f64,
    },
    Concat,
    /// Elementwise sum of equally shaped inputs plus a fixed offset.
    Sum { offset: f64 },
    /// Inverted dropout: active only in train mode, scaled by 1/(1-p).
    Dropout { p: f64 },
    Activation { kind: ActivationKind },
    /// Fixed column projection.
    Select { indices: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNode {
    pub id: String,
    pub op: LayerOp,
    pub inputs: Vec<ValueRef>,
    /// Output width (columns); fixed at construction.
    pub width: usize,
}

/// Maps a categorical column to embedding keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMapper {
    Vocab(Vocab),
    Hash { bits: u32 },
}

impl KeyMapper {
    fn key_of(&self, value: &str) -> Option<usize> {
        match self {
            KeyMapper::Vocab(v) => v.index_of(value),
            KeyMapper::Hash { bits } => Some(hash_category(value, *bits)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeySlot {
    pub column: String,
    pub mapper: KeyMapper,
}

/// The opaque row transforms applied before the differentiable region: they
/// gather numeric columns into input slots and map categorical values to
/// embedding keys. Nothing here receives gradients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrozenPreprocessor {
    pub numeric_slots: Vec<Vec<String>>,
    pub key_slots: Vec<KeySlot>,
}

/// A minibatch after frozen preprocessing: per-slot numeric matrices and
/// per-slot embedding keys (None = out of vocabulary).
#[derive(Debug, Clone, PartialEq)]
pub struct NetBatch {
    pub rows: usize,
    pub numeric: Vec<Matrix>,
    pub keys: Vec<Vec<Option<usize>>>,
    pub labels: Vec<f64>,
}

impl FrozenPreprocessor {
    /// Encodes the given dataset rows into a batch.
    pub fn encode(&self, ds: &Dataset, rows: &[usize]) -> Result<NetBatch, NetError> {
        let mut numeric = Vec::with_capacity(self.numeric_slots.len());
        for cols in &self.numeric_slots {
            let mut m = Matrix::zeros(rows.len(), cols.len());
            for (j, c) in cols.iter().enumerate() {
                let col = ds.numeric(c)?;
                for (bi, &r) in rows.iter().enumerate() {
                    m.set(bi, j, col[r]);
                }
            }
            numeric.push(m);
        }
        let mut keys = Vec::with_capacity(self.key_slots.len());
        for slot in &self.key_slots {
            let col = ds.categorical(&slot.column)?;
            keys.push(rows.iter().map(|&r| slot.mapper.key_of(&col[r])).collect());
        }
        Ok(NetBatch {
            rows: rows.len(),
            numeric,
            keys,
            labels: rows.iter().map(|&r| ds.labels[r] as f64).collect(),
        })
    }
}

/// Forward evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active (seeded masks).
    Train,
    /// Dropout off; smooth activations.
    Eval,
    /// Dropout off; tree-block sigmoids replaced by strict unit steps.
    Hard,
}

/// Per-tree-block intermediate values kept for backward.
#[derive(Debug, Clone)]
struct TreeTrace {
    decision_pre: Matrix,
    decision_act: Matrix,
}

/// Activations recorded by a forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    mode: Mode,
    values: Vec<Matrix>,
    tree: Vec<Option<TreeTrace>>,
    dropout_masks: Vec<Option<Matrix>>,
    rows: usize,
}

impl ForwardTrace {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Output of one layer for the traced batch.
    pub fn layer_values(&self, layer: usize) -> &Matrix {
        &self.values[layer]
    }

    /// Smallest |decision pre-activation| across all tree blocks, per batch
    /// row: the distance of the input to its nearest decision threshold under
    /// warm-start weights.
    pub fn min_decision_margin(&self) -> Vec<f64> {
        let mut margins = vec![f64::INFINITY; self.rows];
        for aux in self.tree.iter().flatten() {
            let z = &aux.decision_pre;
            for r in 0..z.rows() {
                for c in 0..z.cols() {
                    let m = math::abs(z.get(r, c));
                    if m < margins[r] {
                        margins[r] = m;
                    }
                }
            }
        }
        margins
    }
}

/// The compiled differentiable program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralGraph {
    pub preprocessor: FrozenPreprocessor,
    pub layers: Vec<LayerNode>,
    pub params: Vec<Parameter>,
    pub output: ValueRef,
}

impl NeuralGraph {
    pub fn new(preprocessor: FrozenPreprocessor) -> Self {
        NeuralGraph {
            preprocessor,
            layers: Vec::new(),
            params: Vec::new(),
            output: ValueRef::Layer(0),
        }
    }

    pub fn add_param(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        trainable: bool,
        fan_in: usize,
    ) -> ParamId {
        assert_eq!(values.len(), rows * cols, "parameter shape mismatch");
        let grad = vec![0.0; values.len()];
        self.params.push(Parameter {
            name: name.into(),
            rows,
            cols,
            values,
            grad,
            trainable,
            fan_in,
        });
        self.params.len() - 1
    }

    /// Appends a layer; inputs must reference existing layers (topological
    /// order by construction).
    pub fn add_layer(
        &mut self,
        id: impl Into<String>,
        op: LayerOp,
        inputs: Vec<ValueRef>,
        width: usize,
    ) -> ValueRef {
        for r in &inputs {
            if let ValueRef::Layer(i) = r {
                assert!(*i < self.layers.len(), "forward reference in layer graph");
            }
        }
        self.layers.push(LayerNode {
            id: id.into(),
            op,
            inputs,
            width,
        });
        ValueRef::Layer(self.layers.len() - 1)
    }

    pub fn width_of(&self, r: ValueRef) -> usize {
        match r {
            ValueRef::NumericInput(s) => self.preprocessor.numeric_slots[s].len(),
            ValueRef::Layer(i) => self.layers[i].width,
        }
    }

    /// Recreates gradient buffers (after deserialization) and zeroes them.
    pub fn reset_gradients(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    fn value_of<'a>(&self, r: ValueRef, batch: &'a NetBatch, values: &'a [Matrix]) -> &'a Matrix {
        match r {
            ValueRef::NumericInput(s) => &batch.numeric[s],
            ValueRef::Layer(i) => &values[i],
        }
    }

    /// Forward pass over a batch. Returns the scalar logits and the
    /// activation trace needed for backward. `dropout_seed` only matters in
    /// train mode with a dropout layer present.
    pub fn forward(
        &self,
        batch: &NetBatch,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<(Vec<f64>, ForwardTrace), NetError> {
        let rows = batch.rows;
        let mut values: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        let mut tree: Vec<Option<TreeTrace>> = vec![None; self.layers.len()];
        let mut masks: Vec<Option<Matrix>> = vec![None; self.layers.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);

        for (li, layer) in self.layers.iter().enumerate() {
            let out = self.forward_layer(li, layer, batch, &values, mode, &mut rng, &mut tree, &mut masks)?;
            values.push(out);
        }

        let out = self.value_of(self.output, batch, &values);
        if out.cols() != 1 {
            return Err(NetError::Shape {
                layer: String::from("<output>"),
                detail: format!("network output must be scalar, got width {}", out.cols()),
            });
        }
        let logits: Vec<f64> = (0..rows).map(|r| out.get(r, 0)).collect();
        Ok((
            logits,
            ForwardTrace {
                mode,
                values,
                tree,
                dropout_masks: masks,
                rows,
            },
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn forward_layer(
        &self,
        li: usize,
        layer: &LayerNode,
        batch: &NetBatch,
        values: &[Matrix],
        mode: Mode,
        rng: &mut ChaCha8Rng,
        tree: &mut [Option<TreeTrace>],
        masks: &mut [Option<Matrix>],
    ) -> Result<Matrix, NetError> {
        let rows = batch.rows;
        let shape_err = |detail: String| NetError::Shape {
            layer: layer.id.clone(),
            detail,
        };
        match &layer.op {
            LayerOp::Dense { weights, bias } => {
                let x = self.value_of(layer.inputs[0], batch, values);
                let w = &self.params[*weights];
                if x.cols() != w.cols {
                    return Err(shape_err(format!("input {} vs weights {}", x.cols(), w.cols)));
                }
                let mut out = Matrix::zeros(rows, w.rows);
                for r in 0..rows {
                    let xr = x.row(r);
                    for o in 0..w.rows {
                        let mut acc = 0.0;
                        let wrow = &w.values[o * w.cols..(o + 1) * w.cols];
                        for i in 0..w.cols {
                            acc += wrow[i] * xr[i];
                        }
                        if let Some(b) = bias {
                            acc += self.params[*b].values[o];
                        }
                        out.set(r, o, acc);
                    }
                }
                Ok(out)
            }
            LayerOp::Affine { scale, bias } => {
                let x = self.value_of(layer.inputs[0], batch, values);
                let s = &self.params[*scale].values;
                let b = &self.params[*bias].values;
                if x.cols() != s.len() {
                    return Err(shape_err(format!("input {} vs scale {}", x.cols(), s.len())));
                }
                let mut out = Matrix::zeros(rows, s.len());
                for r in 0..rows {
                    let xr = x.row(r);
                    for i in 0..s.len() {
                        out.set(r, i, s[i] * xr[i] + b[i]);
                    }
                }
                Ok(out)
            }
            LayerOp::Embedding {
                table,
                key_slot,
                oov,
            } => {
                let t = &self.params[*table];
                let keys = &batch.keys[*key_slot];
                let mut out = Matrix::zeros(rows, t.cols);
                for r in 0..rows {
                    match keys[r] {
                        Some(k) if k < t.rows => {
                            out.row_mut(r)
                                .copy_from_slice(&t.values[k * t.cols..(k + 1) * t.cols]);
                        }
                        Some(k) => {
                            return Err(shape_err(format!("key {k} outside table of {} rows", t.rows)))
                        }
                        None => match oov {
                            OovPolicy::ZeroVector => {}
                            OovPolicy::Uniform => {
                                let u = 1.0 / t.cols as f64;
                                out.row_mut(r).iter_mut().for_each(|v| *v = u);
                            }
                        },
                    }
                }
                Ok(out)
            }
            LayerOp::TreeBlock {
                decision_weights,
                decision_bias,
                conjunction_weights,
                conjunction_bias,
                gamma_decision,
                gamma_conjunction,
            } => {
                let x = self.value_of(layer.inputs[0], batch, values);
                let w1 = &self.params[*decision_weights];
                let b1 = &self.params[*decision_bias];
                let w2 = &self.params[*conjunction_weights];
                let b2 = &self.params[*conjunction_bias];
                if w1.rows > 0 && x.cols() != w1.cols {
                    return Err(shape_err(format!("input {} vs decision weights {}", x.cols(), w1.cols)));
                }
                let internal = w1.rows;
                let leaves = w2.rows;
                let mut decision_pre = Matrix::zeros(rows, internal);
                let mut decision_act = Matrix::zeros(rows, internal);
                let mut out = Matrix::zeros(rows, leaves);
                for r in 0..rows {
                    let xr = x.row(r);
                    for n in 0..internal {
                        let wrow = &w1.values[n * w1.cols..(n + 1) * w1.cols];
                        let mut z = 0.0;
                        for i in 0..w1.cols {
                            z += wrow[i] * xr[i];
                        }
                        z += b1.values[n];
                        decision_pre.set(r, n, z);
                        let a = match mode {
                            Mode::Hard => math::step(z),
                            _ => math::sigmoid(gamma_decision * z),
                        };
                        decision_act.set(r, n, a);
                    }
                    for l in 0..leaves {
                        let mut z = 0.0;
                        if internal > 0 {
                            let wrow = &w2.values[l * internal..(l + 1) * internal];
                            for n in 0..internal {
                                z += wrow[n] * decision_act.get(r, n);
                            }
                        }
                        z += b2.values[l];
                        let a = match mode {
                            Mode::Hard => math::step(z),
                            _ => math::sigmoid(gamma_conjunction * z),
                        };
                        out.set(r, l, a);
                    }
                }
                tree[li] = Some(TreeTrace {
                    decision_pre,
                    decision_act,
                });
                Ok(out)
            }
            LayerOp::Concat => {
                let mut width = 0;
                for &inp in &layer.inputs {
                    width += self.value_of(inp, batch, values).cols();
                }
                let mut out = Matrix::zeros(rows, width);
                for r in 0..rows {
                    let mut off = 0;
                    for &inp in &layer.inputs {
                        let v = self.value_of(inp, batch, values);
                        out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
                        off += v.cols();
                    }
                }
                Ok(out)
            }
            LayerOp::Sum { offset } => {
                let w = self.value_of(layer.inputs[0], batch, values).cols();
                let mut out = Matrix::zeros(rows, w);
                for r in 0..rows {
                    for c in 0..w {
                        out.set(r, c, *offset);
                    }
                }
                for &inp in &layer.inputs {
                    let v = self.value_of(inp, batch, values);
                    if v.cols() != w {
                        return Err(shape_err(format!("sum widths {} vs {}", w, v.cols())));
                    }
                    for r in 0..rows {
                        for c in 0..w {
                            out.set(r, c, out.get(r, c) + v.get(r, c));
                        }
                    }
                }
                Ok(out)
            }
            LayerOp::Dropout { p } => {
                let x = self.value_of(layer.inputs[0], batch, values);
                if mode != Mode::Train || *p == 0.0 {
                    return Ok(x.clone());
                }
                let keep = 1.0 - p;
                let mut mask = Matrix::zeros(rows, x.cols());
                let mut out = Matrix::zeros(rows, x.cols());
                for r in 0..rows {
                    for c in 0..x.cols() {
                        let m = if rng.random_range(0.0..1.0) < keep {
                            1.0 / keep
                        } else {
                            0.0
                        };
                        mask.set(r, c, m);
                        out.set(r, c, x.get(r, c) * m);
                    }
                }
                masks[li] = Some(mask);
                Ok(out)
            }
            LayerOp::Activation { kind } => {
                let x = self.value_of(layer.inputs[0], batch, values);
                let mut out = Matrix::zeros(rows, x.cols());
                for r in 0..rows {
                    for c in 0..x.cols() {
                        let v = x.get(r, c);
                        out.set(
                            r,
                            c,
                            match kind {
                                ActivationKind::Sigmoid => math::sigmoid(v),
                                ActivationKind::Relu => {
                                    if v > 0.0 {
                                        v
                                    } else {
                                        0.0
                                    }
                                }
                            },
                        );
                    }
                }
                Ok(out)
            }
            LayerOp::Select { indices } => {
                let x = self.value_of(layer.inputs[0], batch, values);
                let mut out = Matrix::zeros(rows, indices.len());
                for r in 0..rows {
                    for (j, &k) in indices.iter().enumerate() {
                        out.set(r, j, x.get(r, k));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Reverse-topological gradient accumulation. Gradients are zeroed first;
    /// non-trainable parameters still accumulate (the optimizer masks them).
    pub fn backward(
        &mut self,
        trace: &ForwardTrace,
        batch: &NetBatch,
        dloss_dlogits: &[f64],
    ) -> Result<(), NetError> {
        if trace.mode == Mode::Hard {
            return Err(NetError::NonDifferentiable);
        }
        self.reset_gradients();

        let mut adjoints: Vec<Matrix> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, _)| Matrix::zeros(trace.rows, trace.values[i].cols()))
            .collect();
        match self.output {
            ValueRef::Layer(i) => {
                for r in 0..trace.rows {
                    adjoints[i].set(r, 0, dloss_dlogits[r]);
                }
            }
            ValueRef::NumericInput(_) => return Ok(()),
        }

        for li in (0..self.layers.len()).rev() {
            let layer = self.layers[li].clone();
            let dy = adjoints[li].clone();
            self.backward_layer(li, &layer, batch, trace, &dy, &mut adjoints)?;
        }
        Ok(())
    }

    fn backward_layer(
        &mut self,
        li: usize,
        layer: &LayerNode,
        batch: &NetBatch,
        trace: &ForwardTrace,
        dy: &Matrix,
        adjoints: &mut [Matrix],
    ) -> Result<(), NetError> {
        let rows = trace.rows;
        // Borrow helper: input value matrices live in the trace or the batch.
        let input_value = |r: ValueRef| -> &Matrix {
            match r {
                ValueRef::NumericInput(s) => &batch.numeric[s],
                ValueRef::Layer(i) => &trace.values[i],
            }
        };
        match &layer.op {
            LayerOp::Dense { weights, bias } => {
                let x = input_value(layer.inputs[0]).clone();
                let (w_id, b_id) = (*weights, *bias);
                let (w_rows, w_cols) = (self.params[w_id].rows, self.params[w_id].cols);
                let mut dx = Matrix::zeros(rows, w_cols);
                for r in 0..rows {
                    for o in 0..w_rows {
                        let g = dy.get(r, o);
                        if g == 0.0 {
                            continue;
                        }
                        for i in 0..w_cols {
                            self.params[w_id].grad[o * w_cols + i] += g * x.get(r, i);
                            dx.set(
                                r,
                                i,
                                dx.get(r, i) + g * self.params[w_id].values[o * w_cols + i],
                            );
                        }
                        if let Some(b) = b_id {
                            self.params[b].grad[o] += g;
                        }
                    }
                }
                self.push_adjoint(layer.inputs[0], &dx, adjoints);
            }
            LayerOp::Affine { scale, bias } => {
                let x = input_value(layer.inputs[0]).clone();
                let n = self.params[*scale].values.len();
                let mut dx = Matrix::zeros(rows, n);
                for r in 0..rows {
                    for i in 0..n {
                        let g = dy.get(r, i);
                        self.params[*scale].grad[i] += g * x.get(r, i);
                        self.params[*bias].grad[i] += g;
                        dx.set(r, i, g * self.params[*scale].values[i]);
                    }
                }
                self.push_adjoint(layer.inputs[0], &dx, adjoints);
            }
            LayerOp::Embedding {
                table, key_slot, ..
            } => {
                let keys = &batch.keys[*key_slot];
                let cols = self.params[*table].cols;
                for r in 0..rows {
                    if let Some(k) = keys[r] {
                        for c in 0..cols {
                            self.params[*table].grad[k * cols + c] += dy.get(r, c);
                        }
                    }
                }
            }
            LayerOp::TreeBlock {
                decision_weights,
                decision_bias,
                conjunction_weights,
                conjunction_bias,
                gamma_decision,
                gamma_conjunction,
            } => {
                let aux = trace.tree[li].as_ref().expect("tree trace");
                let x = input_value(layer.inputs[0]).clone();
                let leaf_act = &trace.values[li];
                let internal = self.params[*decision_weights].rows;
                let leaves = self.params[*conjunction_weights].rows;
                let in_dim = self.params[*decision_weights].cols;
                let mut dx = Matrix::zeros(rows, x.cols());
                for r in 0..rows {
                    // Through the conjunction layer.
                    let mut d_decision_act = vec![0.0; internal];
                    for l in 0..leaves {
                        let a = leaf_act.get(r, l);
                        let dz2 = dy.get(r, l) * gamma_conjunction * a * (1.0 - a);
                        if dz2 == 0.0 {
                            continue;
                        }
                        self.params[*conjunction_bias].grad[l] += dz2;
                        for n in 0..internal {
                            self.params[*conjunction_weights].grad[l * internal + n] +=
                                dz2 * aux.decision_act.get(r, n);
                            d_decision_act[n] +=
                                dz2 * self.params[*conjunction_weights].values[l * internal + n];
                        }
                    }
                    // Through the decision layer.
                    for n in 0..internal {
                        let a = aux.decision_act.get(r, n);
                        let dz1 = d_decision_act[n] * gamma_decision * a * (1.0 - a);
                        if dz1 == 0.0 {
                            continue;
                        }
                        self.params[*decision_bias].grad[n] += dz1;
                        for i in 0..in_dim {
                            self.params[*decision_weights].grad[n * in_dim + i] +=
                                dz1 * x.get(r, i);
                            dx.set(
                                r,
                                i,
                                dx.get(r, i)
                                    + dz1 * self.params[*decision_weights].values[n * in_dim + i],
                            );
                        }
                    }
                }
                self.push_adjoint(layer.inputs[0], &dx, adjoints);
            }
            LayerOp::Concat => {
                let mut off = 0;
                for &inp in &layer.inputs {
                    let w = match inp {
                        ValueRef::NumericInput(s) => batch.numeric[s].cols(),
                        ValueRef::Layer(i) => trace.values[i].cols(),
                    };
                    let mut dx = Matrix::zeros(rows, w);
                    for r in 0..rows {
                        dx.row_mut(r).copy_from_slice(&dy.row(r)[off..off + w]);
                    }
                    self.push_adjoint(inp, &dx, adjoints);
                    off += w;
                }
            }
            LayerOp::Sum { .. } => {
                for &inp in &layer.inputs {
                    self.push_adjoint(inp, dy, adjoints);
                }
            }
            LayerOp::Dropout { .. } => {
                match &trace.dropout_masks[li] {
                    Some(mask) => {
                        let mut dx = Matrix::zeros(rows, dy.cols());
                        for r in 0..rows {
                            for c in 0..dy.cols() {
                                dx.set(r, c, dy.get(r, c) * mask.get(r, c));
                            }
                        }
                        self.push_adjoint(layer.inputs[0], &dx, adjoints);
                    }
                    None => self.push_adjoint(layer.inputs[0], dy, adjoints),
                }
            }
            LayerOp::Activation { kind } => {
                let y = &trace.values[li];
                let x = input_value(layer.inputs[0]);
                let mut dx = Matrix::zeros(rows, dy.cols());
                for r in 0..rows {
                    for c in 0..dy.cols() {
                        let g = match kind {
                            ActivationKind::Sigmoid => {
                                let a = y.get(r, c);
                                dy.get(r, c) * a * (1.0 - a)
                            }
                            ActivationKind::Relu => {
                                if x.get(r, c) > 0.0 {
                                    dy.get(r, c)
                                } else {
                                    0.0
                                }
                            }
                        };
                        dx.set(r, c, g);
                    }
                }
                self.push_adjoint(layer.inputs[0], &dx, adjoints);
            }
            LayerOp::Select { indices } => {
                let in_w = self.width_of(layer.inputs[0]);
                let mut dx = Matrix::zeros(rows, in_w);
                for r in 0..rows {
                    for (j, &k) in indices.iter().enumerate() {
                        dx.set(r, k, dx.get(r, k) + dy.get(r, j));
                    }
                }
                self.push_adjoint(layer.inputs[0], &dx, adjoints);
            }
        }
        Ok(())
    }

    fn push_adjoint(&self, target: ValueRef, dx: &Matrix, adjoints: &mut [Matrix]) {
        match target {
            // Gradients stop at the frozen preprocessor boundary.
            ValueRef::NumericInput(_) => {}
            ValueRef::Layer(i) => {
                let a = &mut adjoints[i];
                for r in 0..dx.rows() {
                    for c in 0..dx.cols() {
                        a.set(r, c, a.get(r, c) + dx.get(r, c));
                    }
                }
            }
        }
    }

    /// Uniform(−1/√fan_in, +1/√fan_in) resampling of every trainable
    /// parameter; everything else is untouched.
    pub fn init_cold(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            if !p.trainable {
                continue;
            }
            let bound = 1.0 / math::sqrt(p.fan_in.max(1) as f64);
            for v in &mut p.values {
                *v = rng.random_range(-bound..bound);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_batch_net() -> (NeuralGraph, NetBatch) {
        let mut net = NeuralGraph::new(FrozenPreprocessor {
            numeric_slots: vec![vec![String::from("x")]],
            key_slots: vec![],
        });
        let w = net.add_param("dense.w", 1, 1, vec![2.0], true, 1);
        let b = net.add_param("dense.b", 1, 1, vec![0.5], true, 1);
        let out = net.add_layer(
            "dense",
            LayerOp::Dense {
                weights: w,
                bias: Some(b),
            },
            vec![ValueRef::NumericInput(0)],
            1,
        );
        net.output = out;
        let batch = NetBatch {
            rows: 0,
            numeric: vec![Matrix::zeros(0, 1)],
            keys: vec![],
            labels: vec![],
        };
        (net, batch)
    }

    #[test]
    fn empty_batch_gives_empty_logits() {
        let (net, batch) = empty_batch_net();
        let (logits, _) = net.forward(&batch, Mode::Eval, 0).unwrap();
        assert!(logits.is_empty());
    }

    #[test]
    fn dense_forward_and_backward_textbook_case() {
        let (mut net, _) = empty_batch_net();
        let batch = NetBatch {
            rows: 2,
            numeric: vec![Matrix::from_rows(&[vec![3.0], vec![-1.0]])],
            keys: vec![],
            labels: vec![1.0, 0.0],
        };
        let (logits, trace) = net.forward(&batch, Mode::Train, 0).unwrap();
        assert_eq!(logits, vec![6.5, -1.5]);
        net.backward(&trace, &batch, &[1.0, 2.0]).unwrap();
        // dW = sum_r dy_r * x_r = 1*3 + 2*(-1) = 1; db = 1 + 2 = 3.
        assert_eq!(net.params[0].grad, vec![1.0]);
        assert_eq!(net.params[1].grad, vec![3.0]);
    }

    #[test]
    fn train_mode_with_zero_dropout_equals_eval_bitwise() {
        let mut net = NeuralGraph::new(FrozenPreprocessor {
            numeric_slots: vec![vec![String::from("a"), String::from("b")]],
            key_slots: vec![],
        });
        let w = net.add_param("w", 1, 2, vec![0.3, -0.7], true, 2);
        let d0 = net.add_layer(
            "dense",
            LayerOp::Dense {
                weights: w,
                bias: None,
            },
            vec![ValueRef::NumericInput(0)],
            1,
        );
        let drop = net.add_layer("drop", LayerOp::Dropout { p: 0.0 }, vec![d0], 1);
        net.output = drop;
        let batch = NetBatch {
            rows: 3,
            numeric: vec![Matrix::from_rows(&[
                vec![0.1, 0.2],
                vec![-0.5, 0.9],
                vec![2.0, -2.0],
            ])],
            keys: vec![],
            labels: vec![0.0, 1.0, 1.0],
        };
        let (train_logits, _) = net.forward(&batch, Mode::Train, 123).unwrap();
        let (eval_logits, _) = net.forward(&batch, Mode::Eval, 456).unwrap();
        assert_eq!(train_logits, eval_logits);
    }

    #[test]
    fn embedding_gradient_only_on_looked_up_rows() {
        let mut net = NeuralGraph::new(FrozenPreprocessor {
            numeric_slots: vec![],
            key_slots: vec![KeySlot {
                column: String::from("c"),
                mapper: KeyMapper::Hash { bits: 2 },
            }],
        });
        let t = net.add_param("emb", 4, 1, vec![0.1, 0.2, 0.3, 0.4], true, 1);
        let e = net.add_layer(
            "emb",
            LayerOp::Embedding {
                table: t,
                key_slot: 0,
                oov: OovPolicy::ZeroVector,
            },
            vec![],
            1,
        );
        net.output = e;
        let batch = NetBatch {
            rows: 2,
            numeric: vec![],
            keys: vec![vec![Some(2), Some(2)]],
            labels: vec![0.0, 1.0],
        };
        let (logits, trace) = net.forward(&batch, Mode::Train, 0).unwrap();
        assert_eq!(logits, vec![0.3, 0.3]);
        let mut net2 = net.clone();
        net2.backward(&trace, &batch, &[1.0, 1.0]).unwrap();
        assert_eq!(net2.params[0].grad, vec![0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn oov_rows_are_fixed_fallbacks() {
        let mut net = NeuralGraph::new(FrozenPreprocessor::default());
        let t = net.add_param("emb", 2, 2, vec![1.0, 2.0, 3.0, 4.0], false, 2);
        let e = net.add_layer(
            "emb",
            LayerOp::Embedding {
                table: t,
                key_slot: 0,
                oov: OovPolicy::Uniform,
            },
            vec![],
            2,
        );
        let sel = net.add_layer(
            "sel",
            LayerOp::Select { indices: vec![0] },
            vec![e],
            1,
        );
        net.output = sel;
        let batch = NetBatch {
            rows: 1,
            numeric: vec![],
            keys: vec![vec![None]],
            labels: vec![0.0],
        };
        let (logits, _) = net.forward(&batch, Mode::Eval, 0).unwrap();
        assert_eq!(logits, vec![0.5]);
    }

    #[test]
    fn backward_after_hard_forward_is_an_error() {
        let (mut net, _) = empty_batch_net();
        let batch = NetBatch {
            rows: 1,
            numeric: vec![Matrix::from_rows(&[vec![1.0]])],
            keys: vec![],
            labels: vec![1.0],
        };
        let (_, trace) = net.forward(&batch, Mode::Hard, 0).unwrap();
        assert_eq!(
            net.backward(&trace, &batch, &[1.0]).unwrap_err(),
            NetError::NonDifferentiable
        );
    }

    #[test]
    fn cold_init_touches_only_trainable_params() {
        let (mut net, _) = empty_batch_net();
        net.params[1].trainable = false;
        let before_w = net.params[0].values.clone();
        let before_b = net.params[1].values.clone();
        net.init_cold(9);
        assert_ne!(net.params[0].values, before_w);
        assert_eq!(net.params[1].values, before_b);
        // Bound respected.
        assert!(net.params[0].values[0].abs() <= 1.0);
        // Same seed, same init.
        let mut net2 = net.clone();
        net2.params[0].values = before_w;
        net2.init_cold(9);
        assert_eq!(net2.params[0].values, net.params[0].values);
    }
}
