//! Run configuration: one JSON document, with `--set key=value` dotted-path
//! overrides applied on top (values parse as JSON first, bare strings
//! otherwise).

use std::path::{Path, PathBuf};

use pipegrad_core::net::TrainConfig;
use pipegrad_core::pipeline::scenarios::{EncoderChoice, Scenario1Config, Scenario2Config};
use pipegrad_core::trainers::GbdtConfig;
use pipegrad_core::translate::TranslationConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    S1Onehot,
    S1Hash,
    S1Lda,
    S2,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtSection {
    pub num_trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
}

impl Default for GbdtSection {
    fn default() -> Self {
        GbdtSection {
            num_trees: 20,
            max_leaves: 8,
            learning_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaSection {
    /// Categorical columns encoded by LDA (each keyed on itself with the
    /// others as companions); empty means all categorical columns.
    pub columns: Vec<String>,
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        LdaSection {
            columns: Vec::new(),
            topics: 8,
            alpha: 0.5,
            beta: 0.1,
            iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaSection {
    pub components: usize,
    /// Count-select threshold in front of PCA; null disables the selector.
    pub min_nonzero: Option<u64>,
}

impl Default for PcaSection {
    fn default() -> Self {
        PcaSection {
            components: 4,
            min_nonzero: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdcaSection {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SdcaSection {
    fn default() -> Self {
        SdcaSection {
            lambda: 1e-3,
            epochs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSection {
    /// Hidden sizes; null auto-sizes to within 10% of the translated
    /// network's trainable count.
    pub hidden: Option<(usize, usize)>,
    pub dropout_p: f64,
}

impl Default for MlpSection {
    fn default() -> Self {
        MlpSection {
            hidden: None,
            dropout_p: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub train_csv: PathBuf,
    pub valid_csv: PathBuf,
    pub test_csv: PathBuf,
    pub schema: PathBuf,
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    /// Pipeline/checkpoint paths; default to files under `out_dir`.
    pub pipeline_json: Option<PathBuf>,
    pub net_json: Option<PathBuf>,
    pub seed: u64,
    pub standardize_numeric: bool,
    pub hash_bits: u32,
    /// Count-select threshold after hash encoders; null disables.
    pub count_select_min_nonzero: Option<u64>,
    pub gbdt: GbdtSection,
    pub lda: LdaSection,
    pub pca: PcaSection,
    pub sdca: SdcaSection,
    pub translation: TranslationConfig,
    pub training: TrainConfig,
    pub mlp: MlpSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train_csv: PathBuf::from("train.csv"),
            valid_csv: PathBuf::from("valid.csv"),
            test_csv: PathBuf::from("test.csv"),
            schema: PathBuf::from("schema.json"),
            scenario: Scenario::S1Onehot,
            out_dir: PathBuf::from("out"),
            pipeline_json: None,
            net_json: None,
            seed: 0,
            standardize_numeric: true,
            hash_bits: 10,
            count_select_min_nonzero: Some(1),
            gbdt: GbdtSection::default(),
            lda: LdaSection::default(),
            pca: PcaSection::default(),
            sdca: SdcaSection::default(),
            translation: TranslationConfig::default(),
            training: TrainConfig::default(),
            mlp: MlpSection::default(),
        }
    }
}

impl RunConfig {
    pub fn pipeline_path(&self) -> PathBuf {
        self.pipeline_json
            .clone()
            .unwrap_or_else(|| self.out_dir.join("pipeline.json"))
    }

    pub fn net_path(&self) -> PathBuf {
        self.net_json
            .clone()
            .unwrap_or_else(|| self.out_dir.join("net.json"))
    }

    pub fn gbdt_config(&self) -> GbdtConfig {
        GbdtConfig {
            num_trees: self.gbdt.num_trees,
            max_leaves: self.gbdt.max_leaves,
            learning_rate: self.gbdt.learning_rate,
            ..GbdtConfig::default()
        }
    }

    fn encoder(&self, cat_columns: &[String]) -> EncoderChoice {
        match self.scenario {
            Scenario::S1Hash => EncoderChoice::Hash {
                bits: self.hash_bits,
                min_nonzero_count: self.count_select_min_nonzero,
            },
            Scenario::S1Lda => EncoderChoice::Lda {
                columns: if self.lda.columns.is_empty() {
                    cat_columns.to_vec()
                } else {
                    self.lda.columns.clone()
                },
                topics: self.lda.topics,
                alpha: self.lda.alpha,
                beta: self.lda.beta,
                iterations: self.lda.iterations,
            },
            _ => EncoderChoice::OneHot,
        }
    }

    pub fn scenario1_config(&self, cat_columns: &[String]) -> Scenario1Config {
        Scenario1Config {
            encoder: self.encoder(cat_columns),
            standardize_numeric: self.standardize_numeric,
            gbdt: self.gbdt_config(),
            seed: self.seed,
        }
    }

    pub fn scenario2_config(&self) -> Scenario2Config {
        Scenario2Config {
            encoder: self.encoder(&[]),
            standardize_numeric: self.standardize_numeric,
            pca_components: self.pca.components,
            pca_min_nonzero: self.pca.min_nonzero,
            gbdt: self.gbdt_config(),
            sdca_lambda: self.sdca.lambda,
            sdca_epochs: self.sdca.epochs,
            seed: self.seed,
        }
    }
}

/// Reads the config document and applies `--set` overrides (dotted paths into
/// the JSON tree) and the `--out` override.
pub fn load_config(
    path: &Path,
    sets: &[String],
    out_override: Option<&Path>,
) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
    for set in sets {
        apply_set(&mut value, set)?;
    }
    let mut cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
    if let Some(out) = out_override {
        cfg.out_dir = out.to_path_buf();
    }
    Ok(cfg)
}

fn apply_set(value: &mut serde_json::Value, set: &str) -> Result<(), CliError> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{set}`")))?;
    let new: serde_json::Value = match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(raw.to_string()),
    };
    let mut cursor = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cursor.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("--set path `{key}`: `{part}` is not an object"))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), new);
            return Ok(());
        }
        cursor = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

/// Validates that every referenced input file exists.
pub fn check_files(cfg: &RunConfig, need_datasets: bool) -> Result<(), CliError> {
    let mut required: Vec<(&str, &Path)> = vec![("schema", cfg.schema.as_path())];
    if need_datasets {
        required.push(("train_csv", cfg.train_csv.as_path()));
        required.push(("valid_csv", cfg.valid_csv.as_path()));
        required.push(("test_csv", cfg.test_csv.as_path()));
    }
    for (field, path) in required {
        if !path.exists() {
            return Err(CliError::Config(format!(
                "config field `{field}`: file `{}` does not exist",
                path.display()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn overrides_take_dotted_paths() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(br#"{"scenario": "s2", "gbdt": {"num_trees": 5}}"#)
            .unwrap();
        let cfg = load_config(
            f.path(),
            &[
                "gbdt.num_trees=9".to_string(),
                "translation.level=\"L3\"".to_string(),
                "training.lr=0.01".to_string(),
            ],
            None,
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::S2);
        assert_eq!(cfg.gbdt.num_trees, 9);
        assert_eq!(cfg.training.lr, 0.01);
        assert_eq!(cfg.translation.level, pipegrad_core::translate::Level::L3);
    }

    #[test]
    fn missing_file_check_names_the_field() {
        let cfg = RunConfig {
            schema: PathBuf::from("/definitely/not/here.json"),
            ..RunConfig::default()
        };
        let err = check_files(&cfg, false).unwrap_err();
        assert!(err.to_string().contains("schema"));
    }
}
