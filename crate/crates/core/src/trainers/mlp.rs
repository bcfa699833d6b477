//! Plain two-hidden-layer MLP baseline over the same frozen feature encoding
//! the translated networks use (identity one-hot embeddings plus a frozen
//! standardizer), trained with the shared fine-tuning runtime.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::onehot::fit_onehot;
use crate::data::{fit_standardizer, Dataset};
use crate::net::{
    finetune, ActivationKind, FrozenPreprocessor, HistoryPoint, KeyMapper, KeySlot, LayerOp,
    NetError, NeuralGraph, OovPolicy, TrainConfig, ValueRef,
};

/// Trainable parameter count of the dense stack for the given input width:
/// d·h1 + h1 + h1·h2 + h2 + h2 + 1.
pub fn mlp_param_count(input_dim: usize, h1: usize, h2: usize) -> usize {
    input_dim * h1 + h1 + h1 * h2 + h2 + h2 + 1
}

/// Builds the baseline network (untrained, seeded uniform init): frozen
/// one-hot embeddings and standardizer feeding ReLU hidden layers with
/// dropout, and a single-logit head.
pub fn build_mlp_baseline(
    ds: &Dataset,
    hidden: (usize, usize),
    dropout_p: f64,
    seed: u64,
) -> Result<NeuralGraph, NetError> {
    if hidden.0 < 1 || hidden.1 < 1 {
        return Err(NetError::Shape {
            layer: "mlp".to_string(),
            detail: "hidden sizes must be >= 1".to_string(),
        });
    }
    let mut net = NeuralGraph::new(FrozenPreprocessor::default());
    let mut sources: Vec<ValueRef> = Vec::new();
    let mut width = 0usize;

    for col in ds.categorical_column_names() {
        let vocab = fit_onehot(ds.categorical(&col)?);
        let card = vocab.cardinality();
        net.preprocessor.key_slots.push(KeySlot {
            column: col.clone(),
            mapper: KeyMapper::Vocab(vocab),
        });
        let slot = net.preprocessor.key_slots.len() - 1;
        let mut identity = vec![0.0; card * card];
        for i in 0..card {
            identity[i * card + i] = 1.0;
        }
        let table = net.add_param(format!("onehot_{col}.table"), card, card, identity, false, card);
        let out = net.add_layer(
            format!("onehot_{col}"),
            LayerOp::Embedding {
                table,
                key_slot: slot,
                oov: OovPolicy::ZeroVector,
            },
            vec![],
            card,
        );
        sources.push(out);
        width += card;
    }

    let num_cols = ds.numeric_column_names();
    if !num_cols.is_empty() {
        let mut scale = Vec::with_capacity(num_cols.len());
        let mut bias = Vec::with_capacity(num_cols.len());
        for c in &num_cols {
            let (m, s) = fit_standardizer(ds.numeric(c)?);
            scale.push(1.0 / s);
            bias.push(-m / s);
        }
        net.preprocessor.numeric_slots.push(num_cols.clone());
        let n = num_cols.len();
        let s = net.add_param("standardize.scale", 1, n, scale, false, 1);
        let b = net.add_param("standardize.bias", 1, n, bias, false, 1);
        let out = net.add_layer(
            "standardize",
            LayerOp::Affine { scale: s, bias: b },
            vec![ValueRef::NumericInput(0)],
            n,
        );
        sources.push(out);
        width += n;
    }

    if sources.is_empty() {
        return Err(NetError::EmptyDataset("feature columns"));
    }
    let features = if sources.len() == 1 {
        sources[0]
    } else {
        net.add_layer("features", LayerOp::Concat, sources, width)
    };

    let (h1, h2) = hidden;
    let mut x = features;
    let mut in_dim = width;
    for (li, h) in [(0usize, h1), (1, h2)] {
        let w = net.add_param(
            format!("hidden{li}.w"),
            h,
            in_dim,
            vec![0.0; h * in_dim],
            true,
            in_dim,
        );
        let b = net.add_param(format!("hidden{li}.b"), 1, h, vec![0.0; h], true, in_dim);
        x = net.add_layer(
            format!("hidden{li}"),
            LayerOp::Dense {
                weights: w,
                bias: Some(b),
            },
            vec![x],
            h,
        );
        x = net.add_layer(
            format!("hidden{li}.relu"),
            LayerOp::Activation {
                kind: ActivationKind::Relu,
            },
            vec![x],
            h,
        );
        if dropout_p > 0.0 {
            x = net.add_layer(
                format!("hidden{li}.dropout"),
                LayerOp::Dropout { p: dropout_p },
                vec![x],
                h,
            );
        }
        in_dim = h;
    }
    let w = net.add_param("head.w", 1, h2, vec![0.0; h2], true, h2);
    let b = net.add_param("head.b", 1, 1, vec![0.0], true, h2);
    let out = net.add_layer(
        "head",
        LayerOp::Dense {
            weights: w,
            bias: Some(b),
        },
        vec![x],
        1,
    );
    net.output = out;
    net.init_cold(seed);
    Ok(net)
}

/// Builds and trains the baseline with the shared runtime; `cfg.seed` drives
/// both initialization and minibatching.
pub fn train_mlp_baseline(
    train: &Dataset,
    valid: &Dataset,
    hidden: (usize, usize),
    dropout_p: f64,
    cfg: &TrainConfig,
) -> Result<(NeuralGraph, Vec<HistoryPoint>), NetError> {
    let net = build_mlp_baseline(train, hidden, dropout_p, cfg.seed)?;
    finetune(&net, train, valid, cfg)
}
