//! The compiler's source language: a validated DAG of trained operators with
//! reference (non-differentiable) prediction semantics.
//!
//! [`Pipeline`] is the validated form; construction computes a topological
//! order and checks arity and dimension consistency, so execution and
//! translation can trust the structure.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{hash_category, DataError, Dataset};
use crate::math;
use crate::trainers::{LdaModel, LinearModel, PcaModel, TreeEnsemble, Vocab};

pub mod scenarios;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("node `{node}` references unknown input `{input}`")]
    UnknownInput { node: String, input: String },
    #[error("cycle through {0}")]
    Cycle(String),
    #[error("node `{node}` expects {expected}, got {actual} inputs")]
    BadArity {
        node: String,
        expected: &'static str,
        actual: usize,
    },
    #[error("node `{node}` expects a {expected} input, got `{input}`")]
    BadInputKind {
        node: String,
        expected: &'static str,
        input: String,
    },
    #[error("dimension mismatch at node `{node}` (from `{input}`): expected {expected}, actual {actual}")]
    DimMismatch {
        node: String,
        input: String,
        expected: usize,
        actual: usize,
    },
    #[error("sink `{0}` not found")]
    UnknownSink(String),
    #[error("expected exactly one sink `{sink}`, but `{other}` is also unconsumed")]
    ExtraSink { sink: String, other: String },
    #[error("sink `{node}` must be scalar, has dimension {dim}")]
    NonScalarSink { node: String, dim: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid payload at node `{node}`: {reason}")]
    BadPayload { node: String, reason: String },
}

/// Where a node reads its input: an upstream node's output, a block of
/// numeric dataset columns (in the given order), or one categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeInput {
    Node(String),
    NumericColumns(Vec<String>),
    CategoricalColumn(String),
}

impl NodeInput {
    fn describe(&self) -> String {
        match self {
            NodeInput::Node(id) => id.clone(),
            NodeInput::NumericColumns(cols) => format!("numeric columns {cols:?}"),
            NodeInput::CategoricalColumn(c) => format!("categorical column `{c}`"),
        }
    }
}

/// Trained payload of an operator node. The serialized tag is the node kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorPayload {
    Onehot { vocab: Vocab },
    HashEncode { bits: u32 },
    Lda { model: LdaModel },
    Standardize { means: Vec<f64>, scales: Vec<f64> },
    Pca { model: PcaModel },
    TreeEnsemble { model: TreeEnsemble },
    Linear { model: LinearModel },
    LeafOnehot { model: TreeEnsemble },
    Concat,
    Sigmoid,
    ColumnSelect { input_dim: usize, keep: Vec<usize> },
}

impl OperatorPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            OperatorPayload::Onehot { .. } => "onehot",
            OperatorPayload::HashEncode { .. } => "hash_encode",
            OperatorPayload::Lda { .. } => "lda",
            OperatorPayload::Standardize { .. } => "standardize",
            OperatorPayload::Pca { .. } => "pca",
            OperatorPayload::TreeEnsemble { .. } => "tree_ensemble",
            OperatorPayload::Linear { .. } => "linear",
            OperatorPayload::LeafOnehot { .. } => "leaf_onehot",
            OperatorPayload::Concat => "concat",
            OperatorPayload::Sigmoid => "sigmoid",
            OperatorPayload::ColumnSelect { .. } => "column_select",
        }
    }

    fn takes_categorical(&self) -> bool {
        matches!(
            self,
            OperatorPayload::Onehot { .. }
                | OperatorPayload::HashEncode { .. }
                | OperatorPayload::Lda { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNode {
    pub id: String,
    pub payload: OperatorPayload,
    pub inputs: Vec<NodeInput>,
}

/// Unvalidated operator DAG; the serialization unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineGraph {
    pub nodes: Vec<OperatorNode>,
    pub sink: String,
}

/// Validated pipeline: graph plus topological order and per-node output
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    graph: PipelineGraph,
    order: Vec<usize>,
    output_dims: Vec<usize>,
}

/// Checks structure (unique ids, acyclicity, single scalar sink) and
/// dimensional consistency, producing an executable [`Pipeline`].
pub fn validate(graph: PipelineGraph) -> Result<Pipeline, GraphError> {
    validate_impl(graph, false)
}

/// Validation without the sink checks, for graphs still under construction
/// (scenario fitting materializes intermediate features this way).
pub(crate) fn validate_partial(graph: PipelineGraph) -> Result<Pipeline, GraphError> {
    validate_impl(graph, true)
}

fn validate_impl(graph: PipelineGraph, partial: bool) -> Result<Pipeline, GraphError> {
    let n = graph.nodes.len();
    for (i, node) in graph.nodes.iter().enumerate() {
        if graph.nodes[..i].iter().any(|o| o.id == node.id) {
            return Err(GraphError::DuplicateNodeId(node.id.clone()));
        }
    }
    let index_of = |id: &str| graph.nodes.iter().position(|n| n.id == id);

    // Kahn's algorithm over node-to-node edges.
    let mut indegree = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in graph.nodes.iter().enumerate() {
        for input in &node.inputs {
            if let NodeInput::Node(dep) = input {
                let j = index_of(dep).ok_or_else(|| GraphError::UnknownInput {
                    node: node.id.clone(),
                    input: dep.clone(),
                })?;
                indegree[i] += 1;
                consumers[j].push(i);
            }
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop() {
        order.push(i);
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push(c);
            }
        }
    }
    if order.len() != n {
        let stuck: Vec<&str> = (0..n)
            .filter(|&i| indegree[i] > 0)
            .map(|i| graph.nodes[i].id.as_str())
            .collect();
        return Err(GraphError::Cycle(stuck.join(", ")));
    }
    order.sort_by_key(|&i| topo_rank(&graph, &consumers, i));

    // Exactly one sink: the declared one, unconsumed by anything else.
    let sink_idx = index_of(&graph.sink).ok_or_else(|| GraphError::UnknownSink(graph.sink.clone()))?;
    if !partial {
        for (i, node) in graph.nodes.iter().enumerate() {
            if consumers[i].is_empty() && i != sink_idx {
                return Err(GraphError::ExtraSink {
                    sink: graph.sink.clone(),
                    other: node.id.clone(),
                });
            }
        }
    }

    // Arity, input kinds, and dimensions in topological order.
    let mut dims = vec![0usize; n];
    for &i in &order {
        dims[i] = node_output_dim(&graph, &dims, i)?;
    }
    if !partial && dims[sink_idx] != 1 {
        return Err(GraphError::NonScalarSink {
            node: graph.sink.clone(),
            dim: dims[sink_idx],
        });
    }

    Ok(Pipeline {
        graph,
        order,
        output_dims: dims,
    })
}

/// Stable topological rank: longest path from a source. Used only to fix a
/// deterministic order among independent nodes.
fn topo_rank(graph: &PipelineGraph, _consumers: &[Vec<usize>], start: usize) -> (usize, usize) {
    fn depth(graph: &PipelineGraph, i: usize) -> usize {
        graph.nodes[i]
            .inputs
            .iter()
            .filter_map(|inp| match inp {
                NodeInput::Node(id) => graph.nodes.iter().position(|n| &n.id == id),
                _ => None,
            })
            .map(|j| depth(graph, j) + 1)
            .max()
            .unwrap_or(0)
    }
    (depth(graph, start), start)
}

fn float_input_dim(
    graph: &PipelineGraph,
    dims: &[usize],
    node: &OperatorNode,
    input: &NodeInput,
) -> Result<usize, GraphError> {
    match input {
        NodeInput::Node(id) => {
            let j = graph
                .nodes
                .iter()
                .position(|n| &n.id == id)
                .expect("validated edge");
            Ok(dims[j])
        }
        NodeInput::NumericColumns(cols) => Ok(cols.len()),
        NodeInput::CategoricalColumn(_) => Err(GraphError::BadInputKind {
            node: node.id.clone(),
            expected: "numeric",
            input: input.describe(),
        }),
    }
}

fn expect_arity(node: &OperatorNode, expected: usize) -> Result<(), GraphError> {
    if node.inputs.len() != expected {
        return Err(GraphError::BadArity {
            node: node.id.clone(),
            expected: if expected == 1 { "exactly 1" } else { "exact" },
            actual: node.inputs.len(),
        });
    }
    Ok(())
}

fn node_output_dim(graph: &PipelineGraph, dims: &[usize], i: usize) -> Result<usize, GraphError> {
    let node = &graph.nodes[i];
    if node.payload.takes_categorical() {
        expect_arity(node, 1)?;
        match &node.inputs[0] {
            NodeInput::CategoricalColumn(_) => {}
            other => {
                return Err(GraphError::BadInputKind {
                    node: node.id.clone(),
                    expected: "categorical",
                    input: other.describe(),
                })
            }
        }
        return Ok(match &node.payload {
            OperatorPayload::Onehot { vocab } => vocab.cardinality(),
            OperatorPayload::HashEncode { bits } => {
                if !(1..=30).contains(bits) {
                    return Err(GraphError::BadPayload {
                        node: node.id.clone(),
                        reason: format!("hash bits {bits} outside 1..=30"),
                    });
                }
                1usize << bits
            }
            OperatorPayload::Lda { model } => model.topics(),
            _ => unreachable!(),
        });
    }

    match &node.payload {
        OperatorPayload::Concat => {
            if node.inputs.len() < 2 {
                return Err(GraphError::BadArity {
                    node: node.id.clone(),
                    expected: "at least 2",
                    actual: node.inputs.len(),
                });
            }
            let mut total = 0;
            for input in &node.inputs {
                total += float_input_dim(graph, dims, node, input)?;
            }
            Ok(total)
        }
        payload => {
            expect_arity(node, 1)?;
            let din = float_input_dim(graph, dims, node, &node.inputs[0])?;
            let expect_dim = |expected: usize| -> Result<(), GraphError> {
                if din != expected {
                    return Err(GraphError::DimMismatch {
                        node: node.id.clone(),
                        input: node.inputs[0].describe(),
                        expected,
                        actual: din,
                    });
                }
                Ok(())
            };
            match payload {
                OperatorPayload::Standardize { means, scales } => {
                    if means.len() != scales.len() {
                        return Err(GraphError::BadPayload {
                            node: node.id.clone(),
                            reason: format!("{} means vs {} scales", means.len(), scales.len()),
                        });
                    }
                    expect_dim(means.len())?;
                    Ok(din)
                }
                OperatorPayload::Pca { model } => {
                    expect_dim(model.input_dim())?;
                    Ok(model.output_dim())
                }
                OperatorPayload::TreeEnsemble { model } | OperatorPayload::LeafOnehot { model } => {
                    if let Some(f) = model.max_feature() {
                        if f >= din {
                            return Err(GraphError::DimMismatch {
                                node: node.id.clone(),
                                input: node.inputs[0].describe(),
                                expected: f + 1,
                                actual: din,
                            });
                        }
                    }
                    Ok(match payload {
                        OperatorPayload::TreeEnsemble { .. } => 1,
                        _ => model.total_leaves(),
                    })
                }
                OperatorPayload::Linear { model } => {
                    expect_dim(model.weights.len())?;
                    Ok(1)
                }
                OperatorPayload::Sigmoid => Ok(din),
                OperatorPayload::ColumnSelect { input_dim, keep } => {
                    expect_dim(*input_dim)?;
                    if let Some(&bad) = keep.iter().find(|&&k| k >= *input_dim) {
                        return Err(GraphError::BadPayload {
                            node: node.id.clone(),
                            reason: format!("kept index {bad} >= input dim {input_dim}"),
                        });
                    }
                    Ok(keep.len())
                }
                _ => unreachable!(),
            }
        }
    }
}

impl Pipeline {
    pub fn graph(&self) -> &PipelineGraph {
        &self.graph
    }

    pub fn into_graph(self) -> PipelineGraph {
        self.graph
    }

    pub fn output_dim(&self, node_id: &str) -> Option<usize> {
        self.graph
            .nodes
            .iter()
            .position(|n| n.id == node_id)
            .map(|i| self.output_dims[i])
    }

    /// Topologically ordered node ids.
    pub fn topo_ids(&self) -> Vec<&str> {
        self.order
            .iter()
            .map(|&i| self.graph.nodes[i].id.as_str())
            .collect()
    }

    fn eval_all(&self, ds: &Dataset, row: usize) -> Result<Vec<Vec<f64>>, GraphError> {
        let mut outputs: Vec<Vec<f64>> = vec![Vec::new(); self.graph.nodes.len()];
        for &i in &self.order {
            outputs[i] = self.eval_node(ds, row, i, &outputs)?;
        }
        Ok(outputs)
    }

    fn gather_float(
        &self,
        ds: &Dataset,
        row: usize,
        input: &NodeInput,
        outputs: &[Vec<f64>],
    ) -> Result<Vec<f64>, GraphError> {
        match input {
            NodeInput::Node(id) => {
                let j = self
                    .graph
                    .nodes
                    .iter()
                    .position(|n| &n.id == id)
                    .expect("validated edge");
                Ok(outputs[j].clone())
            }
            NodeInput::NumericColumns(cols) => {
                let mut v = Vec::with_capacity(cols.len());
                for c in cols {
                    v.push(ds.numeric(c)?[row]);
                }
                Ok(v)
            }
            NodeInput::CategoricalColumn(c) => Err(GraphError::BadInputKind {
                node: String::from("<gather>"),
                expected: "numeric",
                input: c.clone(),
            }),
        }
    }

    fn eval_node(
        &self,
        ds: &Dataset,
        row: usize,
        i: usize,
        outputs: &[Vec<f64>],
    ) -> Result<Vec<f64>, GraphError> {
        let node = &self.graph.nodes[i];
        if node.payload.takes_categorical() {
            let col = match &node.inputs[0] {
                NodeInput::CategoricalColumn(c) => c,
                _ => unreachable!("validated"),
            };
            let value = &ds.categorical(col)?[row];
            return Ok(match &node.payload {
                OperatorPayload::Onehot { vocab } => vocab.encode(value),
                OperatorPayload::HashEncode { bits } => {
                    let mut v = vec![0.0; 1usize << bits];
                    v[hash_category(value, *bits)] = 1.0;
                    v
                }
                OperatorPayload::Lda { model } => model.lookup(value),
                _ => unreachable!(),
            });
        }
        match &node.payload {
            OperatorPayload::Concat => {
                let mut out = Vec::new();
                for input in &node.inputs {
                    out.extend(self.gather_float(ds, row, input, outputs)?);
                }
                Ok(out)
            }
            payload => {
                let x = self.gather_float(ds, row, &node.inputs[0], outputs)?;
                Ok(match payload {
                    OperatorPayload::Standardize { means, scales } => x
                        .iter()
                        .zip(means.iter().zip(scales))
                        .map(|(v, (m, s))| (v - m) / s)
                        .collect(),
                    OperatorPayload::Pca { model } => model.project(&x),
                    OperatorPayload::TreeEnsemble { model } => vec![model.predict(&x)],
                    OperatorPayload::Linear { model } => vec![model.predict(&x)],
                    OperatorPayload::LeafOnehot { model } => model.leaf_onehot(&x),
                    OperatorPayload::Sigmoid => x.iter().map(|&v| math::sigmoid(v)).collect(),
                    OperatorPayload::ColumnSelect { keep, .. } => {
                        keep.iter().map(|&k| x[k]).collect()
                    }
                    _ => unreachable!(),
                })
            }
        }
    }

    /// Reference pipeline semantics: the sink's scalar output for one row.
    pub fn predict(&self, ds: &Dataset, row: usize) -> Result<f64, GraphError> {
        let outputs = self.eval_all(ds, row)?;
        let sink = self
            .graph
            .nodes
            .iter()
            .position(|n| n.id == self.graph.sink)
            .expect("validated sink");
        Ok(outputs[sink][0])
    }

    /// Output of one node (by id) for one row; evaluates ancestors only in
    /// the sense that unrelated nodes' outputs are computed but unused.
    pub fn predict_node(&self, ds: &Dataset, row: usize, node_id: &str) -> Result<Vec<f64>, GraphError> {
        let i = self
            .graph
            .nodes
            .iter()
            .position(|n| n.id == node_id)
            .ok_or_else(|| GraphError::UnknownSink(node_id.to_string()))?;
        let outputs = self.eval_all(ds, row)?;
        Ok(outputs[i].clone())
    }

    /// Sink scores for every row of the dataset.
    pub fn predict_all(&self, ds: &Dataset) -> Result<Vec<f64>, GraphError> {
        (0..ds.rows()).map(|r| self.predict(ds, r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnKind, ColumnSchema, MissingPolicy};
    use crate::trainers::fit_onehot;

    fn linear_node(id: &str, weights: Vec<f64>, bias: f64, input: NodeInput) -> OperatorNode {
        OperatorNode {
            id: id.to_string(),
            payload: OperatorPayload::Linear {
                model: LinearModel { weights, bias },
            },
            inputs: vec![input],
        }
    }

    fn ds_numeric(names: &[&str], rows: &[Vec<f64>], labels: Vec<u8>) -> Dataset {
        let schema = names
            .iter()
            .map(|n| ColumnSchema {
                name: n.to_string(),
                kind: ColumnKind::Numeric,
                missing_policy: MissingPolicy::FillZero,
            })
            .collect();
        let columns = (0..names.len())
            .map(|j| Column::Numeric(rows.iter().map(|r| r[j]).collect()))
            .collect();
        Dataset::new(schema, columns, labels).unwrap()
    }

    #[test]
    fn single_linear_node_validates_and_predicts() {
        let graph = PipelineGraph {
            nodes: vec![linear_node(
                "lin",
                vec![2.0, -1.0],
                0.5,
                NodeInput::NumericColumns(vec!["a".into(), "b".into()]),
            )],
            sink: "lin".into(),
        };
        let p = validate(graph).unwrap();
        assert_eq!(p.topo_ids(), vec!["lin"]);
        let ds = ds_numeric(&["a", "b"], &[vec![1.0, 3.0]], vec![0]);
        assert_eq!(p.predict(&ds, 0).unwrap(), 2.0 * 1.0 - 3.0 + 0.5);
    }

    #[test]
    fn standardize_then_linear_composes() {
        let graph = PipelineGraph {
            nodes: vec![
                OperatorNode {
                    id: "std".into(),
                    payload: OperatorPayload::Standardize {
                        means: vec![0.0],
                        scales: vec![1.0],
                    },
                    inputs: vec![NodeInput::NumericColumns(vec!["a".into()])],
                },
                linear_node("lin", vec![3.0], -1.0, NodeInput::Node("std".into())),
            ],
            sink: "lin".into(),
        };
        let p = validate(graph).unwrap();
        let ds = ds_numeric(&["a"], &[vec![2.0]], vec![0]);
        assert_eq!(p.predict(&ds, 0).unwrap(), 3.0 * 2.0 - 1.0);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let graph = PipelineGraph {
            nodes: vec![linear_node("l", vec![1.0], 0.0, NodeInput::Node("l".into()))],
            sink: "l".into(),
        };
        let err = validate(graph).unwrap_err();
        assert!(matches!(err, GraphError::Cycle(_)));
        assert!(err.to_string().contains("l"));
    }

    #[test]
    fn concat_dimension_error_names_sizes() {
        let graph = PipelineGraph {
            nodes: vec![
                OperatorNode {
                    id: "cat".into(),
                    payload: OperatorPayload::Concat,
                    inputs: vec![
                        NodeInput::NumericColumns(vec!["a".into(), "b".into(), "c".into()]),
                        NodeInput::NumericColumns(vec![
                            "d".into(),
                            "e".into(),
                            "f".into(),
                            "g".into(),
                            "h".into(),
                        ]),
                    ],
                },
                linear_node(
                    "lin",
                    vec![1.0; 7],
                    0.0,
                    NodeInput::Node("cat".into()),
                ),
            ],
            sink: "lin".into(),
        };
        let err = validate(graph).unwrap_err();
        match &err {
            GraphError::DimMismatch {
                node,
                expected,
                actual,
                ..
            } => {
                assert_eq!(node, "lin");
                assert_eq!((*expected, *actual), (7, 8));
            }
            other => panic!("unexpected {other:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("7") && msg.contains("8") && msg.contains("lin"));
    }

    #[test]
    fn onehot_encoding_matches_vocab() {
        let values: Vec<String> = ["x", "y", "x"].iter().map(|s| s.to_string()).collect();
        let vocab = fit_onehot(&values);
        let graph = PipelineGraph {
            nodes: vec![
                OperatorNode {
                    id: "enc".into(),
                    payload: OperatorPayload::Onehot { vocab },
                    inputs: vec![NodeInput::CategoricalColumn("c".into())],
                },
                linear_node("lin", vec![1.0, 2.0], 0.0, NodeInput::Node("enc".into())),
            ],
            sink: "lin".into(),
        };
        let p = validate(graph).unwrap();
        let ds = Dataset::new(
            vec![ColumnSchema {
                name: "c".into(),
                kind: ColumnKind::Categorical,
                missing_policy: MissingPolicy::FillZero,
            }],
            vec![Column::Categorical(
                ["y", "zzz"].iter().map(|s| s.to_string()).collect(),
            )],
            vec![0, 1],
        )
        .unwrap();
        assert_eq!(p.predict(&ds, 0).unwrap(), 2.0);
        // Unseen category encodes to the zero vector.
        assert_eq!(p.predict(&ds, 1).unwrap(), 0.0);
    }

    #[test]
    fn extra_sink_is_rejected() {
        let graph = PipelineGraph {
            nodes: vec![
                linear_node("a", vec![1.0], 0.0, NodeInput::NumericColumns(vec!["x".into()])),
                linear_node("b", vec![1.0], 0.0, NodeInput::NumericColumns(vec!["x".into()])),
            ],
            sink: "a".into(),
        };
        assert!(matches!(
            validate(graph).unwrap_err(),
            GraphError::ExtraSink { .. }
        ));
    }
}
