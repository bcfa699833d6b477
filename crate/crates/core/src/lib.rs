//! Core of `pipegrad`: train classical pipelines on tabular data, compile the
//! trained pipeline DAG into a differentiable network, and fine-tune the result
//! with backpropagation.
//!
//! The crate is `no_std` + `alloc`; everything here is pure computation over
//! in-memory data. CSV/JSON formats and the command-line surface live in the
//! companion `pipegrad` crate.
//!
//! Layout:
//!
//! - [`data`]: columnar datasets, deterministic splits, category hashing,
//!   standardization.
//! - [`trainers`]: the classical operators (gradient-boosted trees, SDCA
//!   linear model, PCA, collapsed-Gibbs LDA, one-hot vocabularies, an MLP
//!   baseline).
//! - [`pipeline`]: the validated operator DAG with reference prediction
//!   semantics, plus the canned scenario builders.
//! - [`translate`]: lowers each operator into a differentiable module and
//!   composes them into a [`net::NeuralGraph`].
//! - [`net`]: the differentiable runtime: forward/backward, logistic loss,
//!   Adam with decoupled weight decay, minibatch fine-tuning.
//! - [`eval`]: AUC, pipeline/network fidelity checks, finite-difference
//!   gradient audits, parameter counting.
//! - [`synthetic`]: the seeded synthetic tabular task used by tests and the
//!   bundled fixtures.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod data;
pub mod eval;
pub mod linalg;
pub mod math;
pub mod net;
pub mod pipeline;
pub mod synthetic;
pub mod trainers;
pub mod translate;
