//! The two benchmark pipelines: canned graph constructors over trained
//! parts, plus fitting that trains the operators greedily (one at a time) in
//! topological order.
//!
//! Scenario 1: encoders over categorical columns ⊕ (standardized) numerics →
//! gradient-boosted trees.
//!
//! Scenario 2: encoded features → (count select) → PCA → trees → per-tree leaf
//! indicators, concatenated with the encoded features → SDCA linear model.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{
    validate, validate_partial, GraphError, NodeInput, OperatorNode, OperatorPayload, Pipeline,
    PipelineGraph,
};
use crate::data::{fit_standardizer, hash_category, Dataset};
use crate::linalg::Matrix;
use crate::trainers::{
    fit_lda, fit_onehot, fit_pca, train_gbdt, train_linear_sdca, GbdtConfig, LinearModel,
    PcaModel, TrainError, TreeEnsemble,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FitError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid scenario config: {0}")]
    Invalid(String),
}

/// How categorical columns enter the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum EncoderChoice {
    OneHot,
    /// Hashed one-hot; slots whose nonzero count over the training rows is
    /// below `min_nonzero_count` are dropped by a column-select node.
    Hash {
        bits: u32,
        min_nonzero_count: Option<u64>,
    },
    /// The listed columns are encoded by per-column LDA models learning their
    /// interaction; remaining categorical columns fall back to one-hot.
    Lda {
        columns: Vec<String>,
        topics: usize,
        alpha: f64,
        beta: f64,
        iterations: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario1Config {
    pub encoder: EncoderChoice,
    pub standardize_numeric: bool,
    pub gbdt: GbdtConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario2Config {
    pub encoder: EncoderChoice,
    pub standardize_numeric: bool,
    pub pca_components: usize,
    /// Count-select threshold applied to the encoded features before PCA.
    pub pca_min_nonzero: Option<u64>,
    pub gbdt: GbdtConfig,
    pub sdca_lambda: f64,
    pub sdca_epochs: usize,
    pub seed: u64,
}

/// One trained categorical encoder: the column it reads, its payload, and an
/// optional list of output dimensions kept by a count selector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPart {
    pub column: String,
    pub payload: OperatorPayload,
    pub keep: Option<Vec<usize>>,
}

impl EncoderPart {
    fn output_dim(&self) -> usize {
        match &self.payload {
            OperatorPayload::Onehot { vocab } => vocab.cardinality(),
            OperatorPayload::HashEncode { bits } => 1usize << bits,
            OperatorPayload::Lda { model } => model.topics(),
            _ => 0,
        }
    }
}

/// The shared front of both scenarios: trained encoders plus the optional
/// numeric standardizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStage {
    pub encoders: Vec<EncoderPart>,
    /// (means, scales) when numerics are standardized.
    pub standardizer: Option<(Vec<f64>, Vec<f64>)>,
    pub numeric_columns: Vec<String>,
}

/// Emits the feature-stage nodes and returns the joined feature input.
fn build_feature_stage(
    stage: &FeatureStage,
    join_id: &str,
    nodes: &mut Vec<OperatorNode>,
) -> Result<NodeInput, FitError> {
    let mut sources = Vec::new();
    for enc in &stage.encoders {
        let prefix = match &enc.payload {
            OperatorPayload::Onehot { .. } => "onehot",
            OperatorPayload::HashEncode { .. } => "hash",
            OperatorPayload::Lda { .. } => "lda",
            other => {
                return Err(FitError::Invalid(format!(
                    "`{}` is not a categorical encoder",
                    other.kind()
                )))
            }
        };
        let id = format!("{prefix}_{}", enc.column);
        nodes.push(OperatorNode {
            id: id.clone(),
            payload: enc.payload.clone(),
            inputs: vec![NodeInput::CategoricalColumn(enc.column.clone())],
        });
        if let Some(keep) = &enc.keep {
            let sel = format!("select_{}", enc.column);
            nodes.push(OperatorNode {
                id: sel.clone(),
                payload: OperatorPayload::ColumnSelect {
                    input_dim: enc.output_dim(),
                    keep: keep.clone(),
                },
                inputs: vec![NodeInput::Node(id)],
            });
            sources.push(NodeInput::Node(sel));
        } else {
            sources.push(NodeInput::Node(id));
        }
    }
    if !stage.numeric_columns.is_empty() {
        match &stage.standardizer {
            Some((means, scales)) => {
                nodes.push(OperatorNode {
                    id: "standardize".to_string(),
                    payload: OperatorPayload::Standardize {
                        means: means.clone(),
                        scales: scales.clone(),
                    },
                    inputs: vec![NodeInput::NumericColumns(stage.numeric_columns.clone())],
                });
                sources.push(NodeInput::Node("standardize".to_string()));
            }
            None => sources.push(NodeInput::NumericColumns(stage.numeric_columns.clone())),
        }
    }
    match sources.len() {
        0 => Err(FitError::Invalid("dataset has no feature columns".to_string())),
        1 => Ok(sources.pop().expect("one source")),
        _ => {
            nodes.push(OperatorNode {
                id: join_id.to_string(),
                payload: OperatorPayload::Concat,
                inputs: sources,
            });
            Ok(NodeInput::Node(join_id.to_string()))
        }
    }
}

/// Canned constructor: encoders ⊕ numerics → tree ensemble.
pub fn build_scenario1(stage: &FeatureStage, ensemble: TreeEnsemble) -> Result<Pipeline, FitError> {
    let mut nodes = Vec::new();
    let features = build_feature_stage(stage, "features", &mut nodes)?;
    nodes.push(OperatorNode {
        id: "trees".to_string(),
        payload: OperatorPayload::TreeEnsemble { model: ensemble },
        inputs: vec![features],
    });
    Ok(validate(PipelineGraph {
        nodes,
        sink: "trees".to_string(),
    })?)
}

/// Canned constructor: encoded → (select) → PCA → activated-leaf indicators
/// ⊕ encoded → linear model.
pub fn build_scenario2(
    stage: &FeatureStage,
    pre_pca_select: Option<(usize, Vec<usize>)>,
    pca: PcaModel,
    ensemble: TreeEnsemble,
    linear: LinearModel,
) -> Result<Pipeline, FitError> {
    let mut nodes = Vec::new();
    let encoded = build_feature_stage(stage, "encoded", &mut nodes)?;
    let pca_source = match pre_pca_select {
        Some((input_dim, keep)) => {
            nodes.push(OperatorNode {
                id: "select_pca".to_string(),
                payload: OperatorPayload::ColumnSelect { input_dim, keep },
                inputs: vec![encoded.clone()],
            });
            NodeInput::Node("select_pca".to_string())
        }
        None => encoded.clone(),
    };
    nodes.push(OperatorNode {
        id: "pca".to_string(),
        payload: OperatorPayload::Pca { model: pca },
        inputs: vec![pca_source],
    });
    nodes.push(OperatorNode {
        id: "tree_leaves".to_string(),
        payload: OperatorPayload::LeafOnehot { model: ensemble },
        inputs: vec![NodeInput::Node("pca".to_string())],
    });
    nodes.push(OperatorNode {
        id: "leaf_and_raw".to_string(),
        payload: OperatorPayload::Concat,
        inputs: vec![NodeInput::Node("tree_leaves".to_string()), encoded],
    });
    nodes.push(OperatorNode {
        id: "final_linear".to_string(),
        payload: OperatorPayload::Linear { model: linear },
        inputs: vec![NodeInput::Node("leaf_and_raw".to_string())],
    });
    Ok(validate(PipelineGraph {
        nodes,
        sink: "final_linear".to_string(),
    })?)
}

/// Fits the encoders of the feature stage on the training data.
fn fit_encoders(ds: &Dataset, encoder: &EncoderChoice) -> Result<Vec<EncoderPart>, FitError> {
    let mut parts = Vec::new();
    for col in ds.categorical_column_names() {
        let column = ds.categorical(&col).map_err(GraphError::Data)?;
        let part = match encoder {
            EncoderChoice::OneHot => EncoderPart {
                column: col.clone(),
                payload: OperatorPayload::Onehot {
                    vocab: fit_onehot(column),
                },
                keep: None,
            },
            EncoderChoice::Hash {
                bits,
                min_nonzero_count,
            } => {
                let keep = match min_nonzero_count {
                    None => None,
                    Some(threshold) => {
                        let dim = 1usize << bits;
                        let mut counts = vec![0u64; dim];
                        for v in column {
                            counts[hash_category(v, *bits)] += 1;
                        }
                        let keep: Vec<usize> =
                            (0..dim).filter(|&s| counts[s] >= *threshold).collect();
                        if keep.is_empty() {
                            return Err(FitError::Invalid(format!(
                                "count select on `{col}` dropped every slot"
                            )));
                        }
                        Some(keep)
                    }
                };
                EncoderPart {
                    column: col.clone(),
                    payload: OperatorPayload::HashEncode { bits: *bits },
                    keep,
                }
            }
            EncoderChoice::Lda {
                columns,
                topics,
                alpha,
                beta,
                iterations,
            } => {
                if columns.contains(&col) {
                    let companions: Vec<&[String]> = columns
                        .iter()
                        .filter(|c| *c != &col)
                        .map(|c| ds.categorical(c).map_err(GraphError::Data))
                        .collect::<Result<_, _>>()?;
                    let model = fit_lda(
                        column,
                        &companions,
                        *topics,
                        *alpha,
                        *beta,
                        *iterations,
                        fnv_seed(&col),
                    )?;
                    EncoderPart {
                        column: col.clone(),
                        payload: OperatorPayload::Lda { model },
                        keep: None,
                    }
                } else {
                    EncoderPart {
                        column: col.clone(),
                        payload: OperatorPayload::Onehot {
                            vocab: fit_onehot(column),
                        },
                        keep: None,
                    }
                }
            }
        };
        parts.push(part);
    }
    Ok(parts)
}

/// Per-column LDA sampler seed, derived from the column name so reruns are
/// stable regardless of column order.
fn fnv_seed(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn fit_feature_stage(
    ds: &Dataset,
    encoder: &EncoderChoice,
    standardize: bool,
) -> Result<FeatureStage, FitError> {
    let encoders = fit_encoders(ds, encoder)?;
    let numeric_columns = ds.numeric_column_names();
    let standardizer = if standardize && !numeric_columns.is_empty() {
        let mut means = Vec::with_capacity(numeric_columns.len());
        let mut scales = Vec::with_capacity(numeric_columns.len());
        for c in &numeric_columns {
            let (m, s) = fit_standardizer(ds.numeric(c).map_err(GraphError::Data)?);
            means.push(m);
            scales.push(s);
        }
        Some((means, scales))
    } else {
        None
    };
    Ok(FeatureStage {
        encoders,
        standardizer,
        numeric_columns,
    })
}

/// Rows × dim matrix of the joined feature stage over the whole dataset,
/// evaluated with the reference executor.
fn materialize_features(stage: &FeatureStage, ds: &Dataset) -> Result<Matrix, FitError> {
    let mut nodes = Vec::new();
    let input = build_feature_stage(stage, "features", &mut nodes)?;
    if let NodeInput::NumericColumns(cols) = &input {
        let mut rows = Vec::with_capacity(ds.rows());
        for r in 0..ds.rows() {
            let mut v = Vec::with_capacity(cols.len());
            for c in cols {
                v.push(ds.numeric(c).map_err(GraphError::Data)?[r]);
            }
            rows.push(v);
        }
        return Ok(Matrix::from_rows(&rows));
    }
    let NodeInput::Node(id) = input else {
        return Err(FitError::Invalid("categorical feature source".to_string()));
    };
    let partial = validate_partial(PipelineGraph {
        nodes,
        sink: id.clone(),
    })?;
    let mut rows = Vec::with_capacity(ds.rows());
    for r in 0..ds.rows() {
        rows.push(partial.predict_node(ds, r, &id)?);
    }
    Ok(Matrix::from_rows(&rows))
}

/// Fits scenario 1 on the training dataset: encoders ⊕ numerics → GBDT.
pub fn fit_scenario1(ds: &Dataset, cfg: &Scenario1Config) -> Result<Pipeline, FitError> {
    let stage = fit_feature_stage(ds, &cfg.encoder, cfg.standardize_numeric)?;
    let x = materialize_features(&stage, ds)?;
    let ensemble = train_gbdt(&x, &ds.labels, &cfg.gbdt, cfg.seed)?;
    build_scenario1(&stage, ensemble)
}

/// Fits scenario 2 on the training dataset:
/// encoded → (select) → PCA → GBDT leaves ⊕ encoded → SDCA linear model.
pub fn fit_scenario2(ds: &Dataset, cfg: &Scenario2Config) -> Result<Pipeline, FitError> {
    if matches!(cfg.encoder, EncoderChoice::Lda { .. }) {
        return Err(FitError::Invalid(
            "scenario 2 encodes categoricals by one-hot or hashing".to_string(),
        ));
    }
    let stage = fit_feature_stage(ds, &cfg.encoder, cfg.standardize_numeric)?;
    let encoded = materialize_features(&stage, ds)?;

    // Optional count selector in front of PCA.
    let pre_pca_keep = match cfg.pca_min_nonzero {
        None => None,
        Some(threshold) => {
            let keep: Vec<usize> = (0..encoded.cols())
                .filter(|&j| {
                    (0..encoded.rows()).filter(|&r| encoded.get(r, j) != 0.0).count() as u64
                        >= threshold
                })
                .collect();
            if keep.is_empty() {
                return Err(FitError::Invalid(
                    "count select before PCA dropped every dimension".to_string(),
                ));
            }
            Some(keep)
        }
    };
    let selected: Matrix = match &pre_pca_keep {
        None => encoded.clone(),
        Some(keep) => {
            let mut m = Matrix::zeros(encoded.rows(), keep.len());
            for r in 0..encoded.rows() {
                for (j, &k) in keep.iter().enumerate() {
                    m.set(r, j, encoded.get(r, k));
                }
            }
            m
        }
    };

    let pca = fit_pca(&selected, cfg.pca_components)?;
    let reduced_rows: Vec<Vec<f64>> = (0..selected.rows())
        .map(|r| pca.project(selected.row(r)))
        .collect();
    let reduced = Matrix::from_rows(&reduced_rows);
    let ensemble = train_gbdt(&reduced, &ds.labels, &cfg.gbdt, cfg.seed)?;

    // Activated-leaf indicators concatenated with the encoded input feed the
    // final linear model.
    let final_rows: Vec<Vec<f64>> = (0..encoded.rows())
        .map(|r| {
            let mut v = ensemble.leaf_onehot(reduced.row(r));
            v.extend_from_slice(encoded.row(r));
            v
        })
        .collect();
    let final_in = Matrix::from_rows(&final_rows);
    let (linear, _) = train_linear_sdca(
        &final_in,
        &ds.labels,
        cfg.sdca_lambda,
        cfg.sdca_epochs,
        cfg.seed,
    )?;

    build_scenario2(
        &stage,
        pre_pca_keep.map(|keep| (encoded.cols(), keep)),
        pca,
        ensemble,
        linear,
    )
}
