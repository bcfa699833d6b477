//! Latent Dirichlet Allocation by collapsed Gibbs sampling.
//!
//! For tabular data a "document" is one value of a designated key column and
//! its tokens are the co-occurring values of companion columns. The trained
//! model is consumed as a category → topic-distribution lookup.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::onehot::Vocab;
use super::TrainError;
use crate::linalg::Matrix;

/// Per-category topic distributions: row i of `doc_topic` is the distribution
/// for `vocabulary.categories()[i]`. Rows sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub doc_topic: Matrix,
    pub vocabulary: Vocab,
}

impl LdaModel {
    pub fn topics(&self) -> usize {
        self.doc_topic.cols()
    }

    /// Topic distribution for a category; unseen categories get the uniform
    /// distribution.
    pub fn lookup(&self, category: &str) -> Vec<f64> {
        match self.vocabulary.index_of(category) {
            Some(i) => self.doc_topic.row(i).to_vec(),
            None => vec![1.0 / self.topics() as f64; self.topics()],
        }
    }
}

/// Collapsed Gibbs sampling over token-id documents. Returns the
/// document-topic matrix; row d is (count(d,k) + alpha) / (len(d) + K*alpha)
/// averaged over the last 10% of iterations. Empty documents get uniform rows.
pub fn fit_lda_gibbs(
    docs: &[Vec<usize>],
    num_token_values: usize,
    k: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    seed: u64,
) -> Result<Matrix, TrainError> {
    if docs.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    if k < 2 {
        return Err(TrainError::InvalidParam("topics must be >= 2".to_string()));
    }
    if iterations == 0 {
        return Err(TrainError::InvalidParam("iterations must be >= 1".to_string()));
    }
    let v = num_token_values.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Topic assignment per token position.
    let mut assign: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    let mut doc_topic_counts = vec![vec![0usize; k]; docs.len()];
    let mut topic_token_counts = vec![vec![0usize; v]; k];
    let mut topic_totals = vec![0usize; k];
    for (d, doc) in docs.iter().enumerate() {
        let mut za = Vec::with_capacity(doc.len());
        for &w in doc {
            if w >= v {
                return Err(TrainError::InvalidParam(format!(
                    "token id {w} out of range (vocab {v})"
                )));
            }
            let z = rng.random_range(0..k);
            za.push(z);
            doc_topic_counts[d][z] += 1;
            topic_token_counts[z][w] += 1;
            topic_totals[z] += 1;
        }
        assign.push(za);
    }

    let averaging_start = iterations - (iterations / 10).max(1).min(iterations);
    let mut averaged = Matrix::zeros(docs.len(), k);
    let mut averaged_samples = 0usize;
    let mut probs = vec![0.0; k];

    for it in 0..iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (pos, &w) in doc.iter().enumerate() {
                let old = assign[d][pos];
                doc_topic_counts[d][old] -= 1;
                topic_token_counts[old][w] -= 1;
                topic_totals[old] -= 1;

                let mut total = 0.0;
                for (t, p) in probs.iter_mut().enumerate() {
                    *p = (doc_topic_counts[d][t] as f64 + alpha)
                        * (topic_token_counts[t][w] as f64 + beta)
                        / (topic_totals[t] as f64 + v as f64 * beta);
                    total += *p;
                }
                let mut u = rng.random_range(0.0..total);
                let mut z = k - 1;
                for (t, p) in probs.iter().enumerate() {
                    if u < *p {
                        z = t;
                        break;
                    }
                    u -= *p;
                }

                assign[d][pos] = z;
                doc_topic_counts[d][z] += 1;
                topic_token_counts[z][w] += 1;
                topic_totals[z] += 1;
            }
        }
        if it >= averaging_start {
            for (d, doc) in docs.iter().enumerate() {
                let denom = doc.len() as f64 + k as f64 * alpha;
                for t in 0..k {
                    let p = (doc_topic_counts[d][t] as f64 + alpha) / denom;
                    averaged.set(d, t, averaged.get(d, t) + p);
                }
            }
            averaged_samples += 1;
        }
    }

    let mut doc_topic = Matrix::zeros(docs.len(), k);
    for (d, doc) in docs.iter().enumerate() {
        if doc.is_empty() {
            for t in 0..k {
                doc_topic.set(d, t, 1.0 / k as f64);
            }
        } else {
            for t in 0..k {
                doc_topic.set(d, t, averaged.get(d, t) / averaged_samples as f64);
            }
        }
    }
    Ok(doc_topic)
}

/// Fits an LDA model over a key column: each distinct key value becomes a
/// document whose tokens are the companion-column values seen in the same
/// rows (tokens are tagged with their column so identical strings in
/// different columns stay distinct).
pub fn fit_lda(
    key_column: &[String],
    companion_columns: &[&[String]],
    k: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    seed: u64,
) -> Result<LdaModel, TrainError> {
    if key_column.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    let vocabulary = super::onehot::fit_onehot(key_column);
    let mut token_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut docs: Vec<Vec<usize>> = vec![Vec::new(); vocabulary.cardinality()];
    for (row, key) in key_column.iter().enumerate() {
        let d = vocabulary.index_of(key).expect("key in vocab");
        for (c, col) in companion_columns.iter().enumerate() {
            let token = format!("{c}={}", col[row]);
            let next = token_ids.len();
            let id = *token_ids.entry(token).or_insert(next);
            docs[d].push(id);
        }
    }
    let doc_topic = fit_lda_gibbs(&docs, token_ids.len(), k, alpha, beta, iterations, seed)?;
    Ok(LdaModel {
        doc_topic,
        vocabulary,
    })
}
