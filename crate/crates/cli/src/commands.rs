//! The five workflow commands plus the fixture generator. Each command is
//! deterministic given its config and seeds; outputs carry no timestamps.

use std::path::Path;

use pipegrad_core::data::Dataset;
use pipegrad_core::eval::{auc, count_parameters, fidelity_check};
use pipegrad_core::net::{finetune, loss_logistic, predict_scores, Mode, NeuralGraph};
use pipegrad_core::pipeline::scenarios::{fit_scenario1, fit_scenario2};
use pipegrad_core::pipeline::Pipeline;
use pipegrad_core::synthetic::{generate, SyntheticConfig};
use pipegrad_core::trainers::{build_mlp_baseline, mlp_param_count};
use pipegrad_core::translate::translate_pipeline;

use crate::config::{check_files, RunConfig, Scenario};
use crate::csvio::{load_csv, read_schema, write_csv, write_schema, SchemaFile};
use crate::formats::{
    load_artifact, net_from_json, net_to_json, pipeline_from_json, pipeline_to_json,
    write_fidelity, write_history, write_params, Artifact,
};
use crate::CliError;

struct LoadedData {
    train: Dataset,
    valid: Dataset,
    test: Dataset,
}

fn load_datasets(cfg: &RunConfig) -> Result<LoadedData, CliError> {
    let schema = read_schema(&cfg.schema)?;
    Ok(LoadedData {
        train: load_csv(&cfg.train_csv, &schema.columns, &schema.label_column)?,
        valid: load_csv(&cfg.valid_csv, &schema.columns, &schema.label_column)?,
        test: load_csv(&cfg.test_csv, &schema.columns, &schema.label_column)?,
    })
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(())
}

fn pipeline_auc(pipeline: &Pipeline, ds: &Dataset) -> Result<f64, CliError> {
    let scores = pipeline.predict_all(ds)?;
    Ok(auc(&scores, &ds.labels)?)
}

fn net_auc(net: &NeuralGraph, ds: &Dataset, batch: usize) -> Result<f64, CliError> {
    let scores = predict_scores(net, ds, batch, Mode::Eval)?;
    Ok(auc(&scores, &ds.labels)?)
}

fn mean_logloss(scores: &[f64], labels: &[u8]) -> f64 {
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    loss_logistic(scores, &y).0
}

/// `fit`: trains the scenario's operators greedily in topological order,
/// writes pipeline.json and prints the classical pipeline's AUC on all three
/// splits.
pub fn cmd_fit(cfg: &RunConfig) -> Result<(), CliError> {
    check_files(cfg, true)?;
    ensure_out_dir(cfg)?;
    let data = load_datasets(cfg)?;
    let pipeline = match cfg.scenario {
        Scenario::S1Onehot | Scenario::S1Hash | Scenario::S1Lda => {
            let cats = data.train.categorical_column_names();
            fit_scenario1(&data.train, &cfg.scenario1_config(&cats))?
        }
        Scenario::S2 => fit_scenario2(&data.train, &cfg.scenario2_config())?,
        Scenario::Custom => {
            return Err(CliError::Config(
                "scenario `custom` uses an existing pipeline.json; run translate/finetune/eval on it instead of fit".to_string(),
            ))
        }
    };
    let path = cfg.pipeline_path();
    std::fs::write(&path, pipeline_to_json(&pipeline)?)?;
    println!(
        "fit: wrote {} (nodes: {})",
        path.display(),
        pipeline.graph().nodes.len()
    );
    println!(
        "fit: pipeline AUC train {:.4} valid {:.4} test {:.4}",
        pipeline_auc(&pipeline, &data.train)?,
        pipeline_auc(&pipeline, &data.valid)?,
        pipeline_auc(&pipeline, &data.test)?,
    );
    Ok(())
}

/// `translate`: warm (or cold) translation of a fitted pipeline, fidelity
/// check on the validation split, parameter report. Nonzero exit when the
/// hard-mode network disagrees with the pipeline.
pub fn cmd_translate(cfg: &RunConfig) -> Result<(), CliError> {
    check_files(cfg, true)?;
    ensure_out_dir(cfg)?;
    let data = load_datasets(cfg)?;
    let text = std::fs::read_to_string(cfg.pipeline_path()).map_err(|e| {
        CliError::Config(format!(
            "cannot read pipeline `{}`: {e}",
            cfg.pipeline_path().display()
        ))
    })?;
    let pipeline = pipeline_from_json(&text)?;
    let net = translate_pipeline(&pipeline, &cfg.translation)?;

    let report = fidelity_check(&pipeline, &net, &data.valid, 1e-9)?;
    let counts = count_parameters(&net);
    std::fs::write(cfg.net_path(), net_to_json(&net)?)?;
    write_fidelity(&cfg.out_dir.join("fidelity.json"), &report)?;
    write_params(&cfg.out_dir.join("params.json"), &counts)?;
    println!(
        "translate: wrote {} ({} layers, {} trainable / {} total parameters)",
        cfg.net_path().display(),
        net.layers.len(),
        counts.total_trainable,
        counts.total_all
    );
    println!(
        "translate: fidelity over {} rows: {} hard mismatches, {} boundary rows excluded, max soft deviation {:.3e}",
        report.rows_checked, report.hard_mismatches, report.excluded_rows, report.max_soft_abs_deviation
    );
    if report.hard_mismatches > 0 {
        return Err(CliError::Fidelity(format!(
            "{} hard mismatches on the validation split",
            report.hard_mismatches
        )));
    }
    Ok(())
}

/// `finetune`: fine-tunes a checkpoint with the shared runtime, writes the
/// best checkpoint and the history CSV, and prints AUC deltas against the
/// frozen starting point.
pub fn cmd_finetune(cfg: &RunConfig) -> Result<(), CliError> {
    check_files(cfg, true)?;
    ensure_out_dir(cfg)?;
    let data = load_datasets(cfg)?;
    let text = std::fs::read_to_string(cfg.net_path()).map_err(|e| {
        CliError::Config(format!(
            "cannot read checkpoint `{}`: {e}",
            cfg.net_path().display()
        ))
    })?;
    let net = net_from_json(&text)?;

    let frozen_valid = net_auc(&net, &data.valid, cfg.training.batch_size)?;
    let frozen_test = net_auc(&net, &data.test, cfg.training.batch_size)?;

    let (tuned, history) = finetune(&net, &data.train, &data.valid, &cfg.training)?;
    let tuned_valid = net_auc(&tuned, &data.valid, cfg.training.batch_size)?;
    let tuned_test = net_auc(&tuned, &data.test, cfg.training.batch_size)?;

    let tuned_path = cfg.out_dir.join("net_tuned.json");
    std::fs::write(&tuned_path, net_to_json(&tuned)?)?;
    write_history(&cfg.out_dir.join("history.csv"), &history)?;
    println!(
        "finetune: wrote {} after {} evaluations",
        tuned_path.display(),
        history.len()
    );
    println!(
        "finetune: valid AUC {:.4} -> {:.4} (delta {:+.4}); test AUC {:.4} -> {:.4} (delta {:+.4})",
        frozen_valid,
        tuned_valid,
        tuned_valid - frozen_valid,
        frozen_test,
        tuned_test,
        tuned_test - frozen_test
    );
    Ok(())
}

/// `eval`: AUC and logloss of a pipeline or checkpoint on one split
/// (pipelines run their reference semantics; networks run eval mode).
pub fn cmd_eval(cfg: &RunConfig, artifact_path: &Path, split: &str) -> Result<(), CliError> {
    check_files(cfg, true)?;
    let data = load_datasets(cfg)?;
    let ds = match split {
        "train" => &data.train,
        "valid" => &data.valid,
        "test" => &data.test,
        other => {
            return Err(CliError::Config(format!(
                "unknown split `{other}` (expected train|valid|test)"
            )))
        }
    };
    let (kind, scores) = match load_artifact(artifact_path)? {
        Artifact::Pipeline(p) => ("pipeline", p.predict_all(ds)?),
        Artifact::Net(n) => (
            "network",
            predict_scores(&n, ds, cfg.training.batch_size, Mode::Eval)?,
        ),
    };
    let auc_value = auc(&scores, &ds.labels)?;
    let logloss = mean_logloss(&scores, &ds.labels);
    println!(
        "eval: {kind} `{}` on {split}: AUC {:.4}, logloss {:.4}",
        artifact_path.display(),
        auc_value,
        logloss
    );
    Ok(())
}

/// Hidden sizes (h, h) whose dense-stack count comes closest to `target`;
/// used to size the MLP baseline within 10% of the translated network.
fn size_mlp(input_dim: usize, target: usize) -> (usize, usize) {
    let mut best = (1usize, 1usize);
    let mut best_gap = usize::MAX;
    for h in 1..=2048usize {
        let count = mlp_param_count(input_dim, h, h);
        let gap = count.abs_diff(target);
        if gap < best_gap {
            best_gap = gap;
            best = (h, h);
        }
        if count > target * 2 {
            break;
        }
    }
    best
}

/// `compare`: classical pipeline vs warm-tuned vs cold-tuned vs an MLP
/// baseline sized to the translated network, one table (markdown + CSV).
pub fn cmd_compare(cfg: &RunConfig) -> Result<(), CliError> {
    check_files(cfg, true)?;
    ensure_out_dir(cfg)?;
    let data = load_datasets(cfg)?;
    let cats = data.train.categorical_column_names();
    let pipeline = match cfg.scenario {
        Scenario::S2 => fit_scenario2(&data.train, &cfg.scenario2_config())?,
        Scenario::Custom => {
            let text = std::fs::read_to_string(cfg.pipeline_path())?;
            pipeline_from_json(&text)?
        }
        _ => fit_scenario1(&data.train, &cfg.scenario1_config(&cats))?,
    };
    std::fs::write(cfg.pipeline_path(), pipeline_to_json(&pipeline)?)?;

    let mut rows: Vec<(String, f64, f64, usize)> = Vec::new();
    rows.push((
        "classical pipeline".to_string(),
        pipeline_auc(&pipeline, &data.valid)?,
        pipeline_auc(&pipeline, &data.test)?,
        0,
    ));

    let warm_net = translate_pipeline(&pipeline, &cfg.translation)?;
    let trainable = count_parameters(&warm_net).total_trainable;
    let (warm_tuned, _) = finetune(&warm_net, &data.train, &data.valid, &cfg.training)?;
    rows.push((
        "translated warm fine-tuned".to_string(),
        net_auc(&warm_tuned, &data.valid, cfg.training.batch_size)?,
        net_auc(&warm_tuned, &data.test, cfg.training.batch_size)?,
        trainable,
    ));

    let mut cold_cfg = cfg.translation.clone();
    cold_cfg.start = pipegrad_core::translate::StartMode::Cold;
    cold_cfg.cold_seed = cfg.seed.wrapping_add(1);
    let cold_net = translate_pipeline(&pipeline, &cold_cfg)?;
    let (cold_tuned, _) = finetune(&cold_net, &data.train, &data.valid, &cfg.training)?;
    rows.push((
        "translated cold fine-tuned".to_string(),
        net_auc(&cold_tuned, &data.valid, cfg.training.batch_size)?,
        net_auc(&cold_tuned, &data.test, cfg.training.batch_size)?,
        count_parameters(&cold_net).total_trainable,
    ));

    // MLP baseline sized within 10% of the translated trainable count. The
    // input width is the width feeding the first hidden layer of a probe net.
    let probe = build_mlp_baseline(&data.train, (1, 1), cfg.mlp.dropout_p, cfg.seed)?;
    let input_dim = probe
        .layers
        .iter()
        .find(|l| l.id == "hidden0")
        .map(|l| probe.width_of(l.inputs[0]))
        .expect("baseline has a hidden layer");
    let hidden = cfg.mlp.hidden.unwrap_or_else(|| size_mlp(input_dim, trainable));
    let mlp = build_mlp_baseline(&data.train, hidden, cfg.mlp.dropout_p, cfg.seed)?;
    let mlp_trainable = count_parameters(&mlp).total_trainable;
    let (mlp_tuned, _) = finetune(&mlp, &data.train, &data.valid, &cfg.training)?;
    rows.push((
        format!("mlp baseline {}x{}", hidden.0, hidden.1),
        net_auc(&mlp_tuned, &data.valid, cfg.training.batch_size)?,
        net_auc(&mlp_tuned, &data.test, cfg.training.batch_size)?,
        mlp_trainable,
    ));

    let mut md = String::from("| model | valid AUC | test AUC | trainable params |\n|---|---|---|---|\n");
    let mut csv_text = String::from("model,valid_auc,test_auc,trainable_params\n");
    for (name, valid, test, params) in &rows {
        md.push_str(&format!("| {name} | {valid:.4} | {test:.4} | {params} |\n"));
        csv_text.push_str(&format!("{name},{valid},{test},{params}\n"));
    }
    std::fs::write(cfg.out_dir.join("compare.md"), &md)?;
    std::fs::write(cfg.out_dir.join("compare.csv"), &csv_text)?;
    print!("{md}");
    if mlp_trainable.abs_diff(trainable) * 10 > trainable {
        println!(
            "note: closest MLP size is {mlp_trainable} trainable parameters vs target {trainable} (outside 10%)"
        );
    }
    Ok(())
}

/// `fixture`: writes the bundled synthetic task (train/valid/test CSVs plus
/// the schema sidecar) so every workflow runs with zero downloads.
pub fn cmd_fixture(out: &Path, rows: usize, seed: u64) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let gen = |n: usize, s: u64| {
        generate(&SyntheticConfig {
            rows: n,
            seed: s,
            ..SyntheticConfig::default()
        })
    };
    let train = gen(rows, seed);
    let valid = gen((rows / 5).max(10), seed.wrapping_add(1));
    let test = gen((rows / 5).max(10), seed.wrapping_add(2));
    let schema = SchemaFile {
        columns: train.schema.clone(),
        label_column: "label".to_string(),
    };
    write_schema(&out.join("schema.json"), &schema)?;
    write_csv(&out.join("train.csv"), &train, "label")?;
    write_csv(&out.join("valid.csv"), &valid, "label")?;
    write_csv(&out.join("test.csv"), &test, "label")?;
    println!(
        "fixture: wrote {} ({} train / {} valid / {} test rows)",
        out.display(),
        train.rows(),
        valid.rows(),
        test.rows()
    );
    Ok(())
}
