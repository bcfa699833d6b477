//! Self-contained classical trainers producing the operators the compiler
//! consumes: gradient-boosted trees, an SDCA linear classifier, PCA,
//! collapsed-Gibbs LDA, one-hot vocabularies, and a plain MLP baseline.

use alloc::string::String;

pub mod gbdt;
pub mod lda;
pub mod linear;
pub mod mlp;
pub mod onehot;
pub mod pca;
pub mod tree;

pub use gbdt::{train_gbdt, GbdtConfig};
pub use lda::{fit_lda, fit_lda_gibbs, LdaModel};
pub use linear::{train_linear_sdca, LinearModel, SdcaReport};
pub use mlp::{build_mlp_baseline, mlp_param_count, train_mlp_baseline};
pub use onehot::{fit_onehot, Vocab};
pub use pca::{fit_pca, PcaModel};
pub use tree::{Tree, TreeEnsemble, TreeNode};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("degenerate labels: both classes must be present")]
    DegenerateLabels,
    #[error("empty training input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
}
