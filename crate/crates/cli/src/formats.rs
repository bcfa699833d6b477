//! Versioned on-disk formats: pipeline graphs (`pipegrad.pipeline/1`),
//! network checkpoints (`pipegrad.net/1`), JSON reports and the training
//! history CSV. Numbers are written in shortest-round-trip decimal form and
//! parsed exactly, so round trips are bit-exact.

use std::path::Path;

use pipegrad_core::eval::{FidelityReport, ParamCount};
use pipegrad_core::net::{HistoryPoint, NeuralGraph};
use pipegrad_core::pipeline::{validate, Pipeline, PipelineGraph};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const PIPELINE_VERSION: &str = "pipegrad.pipeline/1";
pub const NET_VERSION: &str = "pipegrad.net/1";

#[derive(Debug, Serialize, Deserialize)]
struct PipelineFile {
    version: String,
    graph: PipelineGraph,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetFile {
    version: String,
    net: NeuralGraph,
}

/// Any versioned document: used to sniff artifact kinds.
#[derive(Debug, Deserialize)]
struct VersionOnly {
    version: Option<String>,
}

pub fn pipeline_to_json(pipeline: &Pipeline) -> Result<String, CliError> {
    let doc = PipelineFile {
        version: PIPELINE_VERSION.to_string(),
        graph: pipeline.graph().clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn pipeline_from_json(text: &str) -> Result<Pipeline, CliError> {
    let version = sniff_version(text)?;
    if version != PIPELINE_VERSION {
        return Err(CliError::Config(format!(
            "unknown pipeline version `{version}` (expected `{PIPELINE_VERSION}`)"
        )));
    }
    let doc: PipelineFile = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("pipeline document: {e}")))?;
    validate(doc.graph).map_err(Into::into)
}

pub fn net_to_json(net: &NeuralGraph) -> Result<String, CliError> {
    let doc = NetFile {
        version: NET_VERSION.to_string(),
        net: net.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn net_from_json(text: &str) -> Result<NeuralGraph, CliError> {
    let version = sniff_version(text)?;
    if version != NET_VERSION {
        return Err(CliError::Config(format!(
            "unknown network version `{version}` (expected `{NET_VERSION}`)"
        )));
    }
    let doc: NetFile = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("network document: {e}")))?;
    let mut net = doc.net;
    // Gradient buffers are transient and not serialized.
    net.reset_gradients();
    Ok(net)
}

fn sniff_version(text: &str) -> Result<String, CliError> {
    let v: VersionOnly =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("document: {e}")))?;
    v.version
        .ok_or_else(|| CliError::Config("document is missing the `version` field".to_string()))
}

/// A loaded artifact: either a pipeline or a network checkpoint, decided by
/// the version string.
pub enum Artifact {
    Pipeline(Pipeline),
    Net(NeuralGraph),
}

pub fn load_artifact(path: &Path) -> Result<Artifact, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", path.display())))?;
    match sniff_version(&text)?.as_str() {
        PIPELINE_VERSION => Ok(Artifact::Pipeline(pipeline_from_json(&text)?)),
        NET_VERSION => Ok(Artifact::Net(net_from_json(&text)?)),
        other => Err(CliError::Config(format!("unknown artifact version `{other}`"))),
    }
}

pub fn write_fidelity(path: &Path, report: &FidelityReport) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn write_params(path: &Path, counts: &ParamCount) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(counts)?)?;
    Ok(())
}

/// History CSV with the stable header `step,loss,valid_auc`.
pub fn write_history(path: &Path, history: &[HistoryPoint]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot write `{}`: {e}", path.display())))?;
    writer
        .write_record(["step", "loss", "valid_auc"])
        .map_err(|e| CliError::Config(e.to_string()))?;
    for h in history {
        writer
            .write_record([
                h.step.to_string(),
                format!("{}", h.train_loss),
                format!("{}", h.valid_auc),
            ])
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pipegrad_core::pipeline::{NodeInput, OperatorNode, OperatorPayload};
    use pipegrad_core::trainers::LinearModel;

    fn tiny_pipeline() -> Pipeline {
        validate(PipelineGraph {
            nodes: vec![OperatorNode {
                id: "lin".into(),
                payload: OperatorPayload::Linear {
                    model: LinearModel {
                        weights: vec![0.1],
                        bias: -0.7,
                    },
                },
                inputs: vec![NodeInput::NumericColumns(vec!["x".into()])],
            }],
            sink: "lin".into(),
        })
        .unwrap()
    }

    #[test]
    fn pipeline_roundtrip_field_by_field() {
        let p = tiny_pipeline();
        let json = pipeline_to_json(&p).unwrap();
        let back = pipeline_from_json(&json).unwrap();
        assert_eq!(p.graph(), back.graph());
    }

    #[test]
    fn theta_one_decimal_survives_roundtrip_bit_exactly() {
        let mut graph = tiny_pipeline().into_graph();
        if let OperatorPayload::Linear { model } = &mut graph.nodes[0].payload {
            model.weights[0] = 0.1;
            model.bias = 0.30000000000000004;
        }
        let p = validate(graph).unwrap();
        let json = pipeline_to_json(&p).unwrap();
        let back = pipeline_from_json(&json).unwrap();
        let (a, b) = match (&p.graph().nodes[0].payload, &back.graph().nodes[0].payload) {
            (
                OperatorPayload::Linear { model: m1 },
                OperatorPayload::Linear { model: m2 },
            ) => ((m1.weights[0], m1.bias), (m2.weights[0], m2.bias)),
            _ => unreachable!(),
        };
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    #[test]
    fn missing_version_is_an_error() {
        let err = pipeline_from_json("{\"graph\": {\"nodes\": [], \"sink\": \"x\"}}").unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn unknown_version_names_it() {
        let err =
            pipeline_from_json("{\"version\": \"pipegrad.pipeline/99\", \"graph\": {\"nodes\": [], \"sink\": \"x\"}}")
                .unwrap_err();
        assert!(err.to_string().contains("pipegrad.pipeline/99"));
    }

    #[test]
    fn unknown_node_kind_is_named() {
        let text = r#"{"version":"pipegrad.pipeline/1","graph":{"nodes":[{"id":"n","payload":{"kind":"mystery_op"},"inputs":[]}],"sink":"n"}}"#;
        let err = pipeline_from_json(text).unwrap_err();
        assert!(err.to_string().contains("mystery_op"), "{err}");
    }
}
