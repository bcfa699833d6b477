//! Columnar tabular data: schemas, deterministic splits, category hashing and
//! standardization statistics.
//!
//! CSV parsing lives in the companion crate; this module defines the in-memory
//! [`Dataset`] every other module consumes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;

/// Token substituted for missing categorical cells before any encoding.
pub const MISSING_TOKEN: &str = "__MISSING__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// How missing numeric cells are filled at load time. Categorical cells always
/// fall back to [`MISSING_TOKEN`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    FillZero,
    FillMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub missing_policy: MissingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DataError {
    #[error("column `{0}` appears more than once in the schema")]
    DuplicateColumn(String),
    #[error("column `{column}` has {actual} values, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        actual: usize,
    },
    #[error("column kind does not match schema for `{0}`")]
    KindMismatch(String),
    #[error("invalid label at row {row}: labels must be 0 or 1")]
    InvalidLabel { row: usize },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("fractions must sum to 1 (got {0})")]
    BadFractions(f64),
    #[error("split needs at least 3 rows, got {0}")]
    TooFewRows(usize),
    #[error("split produced an empty {0} partition")]
    EmptySplit(&'static str),
}

/// Columnar dataset with binary labels. Columns are stored in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<ColumnSchema>,
    pub columns: Vec<Column>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        schema: Vec<ColumnSchema>,
        columns: Vec<Column>,
        labels: Vec<u8>,
    ) -> Result<Self, DataError> {
        let ds = Dataset {
            schema,
            columns,
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Checks the structural invariants: unique names, aligned lengths,
    /// matching kinds, binary labels, no non-finite numerics.
    pub fn validate(&self) -> Result<(), DataError> {
        for (i, s) in self.schema.iter().enumerate() {
            if self.schema[..i].iter().any(|o| o.name == s.name) {
                return Err(DataError::DuplicateColumn(s.name.clone()));
            }
        }
        let rows = self.labels.len();
        for (s, c) in self.schema.iter().zip(&self.columns) {
            if c.len() != rows {
                return Err(DataError::LengthMismatch {
                    column: s.name.clone(),
                    expected: rows,
                    actual: c.len(),
                });
            }
            match (s.kind, c) {
                (ColumnKind::Numeric, Column::Numeric(v)) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(DataError::NonFinite {
                            column: s.name.clone(),
                            row,
                        });
                    }
                }
                (ColumnKind::Categorical, Column::Categorical(_)) => {}
                _ => return Err(DataError::KindMismatch(s.name.clone())),
            }
        }
        if self.schema.len() != self.columns.len() {
            return Err(DataError::LengthMismatch {
                column: format!("<schema has {} entries>", self.schema.len()),
                expected: self.schema.len(),
                actual: self.columns.len(),
            });
        }
        if let Some(row) = self.labels.iter().position(|&l| l > 1) {
            return Err(DataError::InvalidLabel { row });
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|s| s.name == name)
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], DataError> {
        match self.column_index(name).map(|i| &self.columns[i]) {
            Some(Column::Numeric(v)) => Ok(v),
            Some(_) => Err(DataError::KindMismatch(String::from(name))),
            None => Err(DataError::UnknownColumn(String::from(name))),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<&[String], DataError> {
        match self.column_index(name).map(|i| &self.columns[i]) {
            Some(Column::Categorical(v)) => Ok(v),
            Some(_) => Err(DataError::KindMismatch(String::from(name))),
            None => Err(DataError::UnknownColumn(String::from(name))),
        }
    }

    pub fn numeric_column_names(&self) -> Vec<String> {
        self.schema
            .iter()
            .filter(|s| s.kind == ColumnKind::Numeric)
            .map(|s| s.name.clone())
            .collect()
    }

    pub fn categorical_column_names(&self) -> Vec<String> {
        self.schema
            .iter()
            .filter(|s| s.kind == ColumnKind::Categorical)
            .map(|s| s.name.clone())
            .collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => Column::Numeric(idx.iter().map(|&i| v[i]).collect()),
                Column::Categorical(v) => {
                    Column::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
                }
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            columns,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

/// Deterministic shuffled split. Partition sizes are `floor(fraction * rows)`
/// for valid/test with the remainder going to train.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), DataError> {
    let sum = spec.train_fraction + spec.valid_fraction + spec.test_fraction;
    if math::abs(sum - 1.0) > 1e-9 {
        return Err(DataError::BadFractions(sum));
    }
    let n = ds.rows();
    if n < 3 {
        return Err(DataError::TooFewRows(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    perm.shuffle(&mut rng);

    let n_valid = math::floor(spec.valid_fraction * n as f64) as usize;
    let n_test = math::floor(spec.test_fraction * n as f64) as usize;
    let n_train = n - n_valid - n_test;
    if n_train == 0 {
        return Err(DataError::EmptySplit("train"));
    }
    if n_valid == 0 {
        return Err(DataError::EmptySplit("valid"));
    }
    if n_test == 0 {
        return Err(DataError::EmptySplit("test"));
    }
    let train = ds.subset(&perm[..n_train]);
    let valid = ds.subset(&perm[n_train..n_train + n_valid]);
    let test = ds.subset(&perm[n_train + n_valid..]);
    Ok((train, valid, test))
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Stable category→slot hash: FNV-1a 64 masked to the low `bits` bits.
pub fn hash_category(value: &str, bits: u32) -> usize {
    assert!((1..=30).contains(&bits), "bits must be in 1..=30");
    (fnv1a64(value.as_bytes()) & ((1u64 << bits) - 1)) as usize
}

/// Sample mean and population (1/N) standard deviation; a deviation below
/// 1e-12 is replaced by 1.0 so constant columns stay usable.
pub fn fit_standardizer(column: &[f64]) -> (f64, f64) {
    assert!(!column.is_empty(), "empty column");
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = math::sqrt(var);
    (mean, if sd < 1e-12 { 1.0 } else { sd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn toy(rows: usize) -> Dataset {
        Dataset::new(
            vec![ColumnSchema {
                name: "x".to_string(),
                kind: ColumnKind::Numeric,
                missing_policy: MissingPolicy::FillZero,
            }],
            vec![Column::Numeric((0..rows).map(|i| i as f64).collect())],
            (0..rows).map(|i| (i % 2) as u8).collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = toy(10);
        let spec = SplitSpec {
            train_fraction: 0.8,
            valid_fraction: 0.1,
            test_fraction: 0.1,
            seed: 7,
        };
        let (tr, va, te) = split(&ds, &spec).unwrap();
        assert_eq!((tr.rows(), va.rows(), te.rows()), (8, 1, 1));
        let (tr2, va2, te2) = split(&ds, &spec).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(va, va2);
        assert_eq!(te, te2);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let ds = toy(10);
        let spec = SplitSpec {
            train_fraction: 0.5,
            valid_fraction: 0.5,
            test_fraction: 0.5,
            seed: 0,
        };
        let err = split(&ds, &spec).unwrap_err();
        assert!(matches!(err, DataError::BadFractions(_)));
        assert!(err.to_string().contains("fractions must sum to 1"));
    }

    #[test]
    fn hash_empty_string_at_10_bits() {
        // FNV-1a of "" is the offset basis; low 10 bits are 0x325.
        assert_eq!(hash_category("", 10), 0x325);
        assert_eq!(hash_category("", 10), 805);
    }

    #[test]
    fn hash_is_stable_and_bounded() {
        assert_eq!(hash_category("a", 1), hash_category("a", 1));
        for v in ["", "a", "some longer value", "日本語"] {
            assert!(hash_category(v, 10) < 1024);
        }
    }

    #[test]
    fn hash_distribution_sanity() {
        // 1e5 distinct strings over 1024 slots: no slot should exceed 5x the
        // expected load. Coarse sanity, not a cryptographic claim.
        let mut counts = vec![0usize; 1024];
        for i in 0..100_000 {
            counts[hash_category(&format!("key-{i}"), 10)] += 1;
        }
        let expected = 100_000.0 / 1024.0;
        let max = *counts.iter().max().unwrap();
        assert!((max as f64) < 5.0 * expected, "max slot load {max}");
    }

    #[test]
    fn split_rejects_empty_partitions() {
        let ds = toy(3);
        let spec = SplitSpec {
            train_fraction: 0.34,
            valid_fraction: 0.33,
            test_fraction: 0.33,
            seed: 0,
        };
        // floor(0.33 * 3) = 0 rows for valid.
        assert!(matches!(
            split(&ds, &spec).unwrap_err(),
            DataError::EmptySplit(_)
        ));
    }

    #[test]
    fn colliding_strings_share_a_slot() {
        // With 16 slots, 17 distinct strings must collide somewhere.
        let mut seen: alloc::collections::BTreeMap<usize, String> = alloc::collections::BTreeMap::new();
        let mut found = None;
        for i in 0..100 {
            let s = format!("key-{i}");
            let slot = hash_category(&s, 4);
            if let Some(prev) = seen.get(&slot) {
                found = Some((prev.clone(), s));
                break;
            }
            seen.insert(slot, s);
        }
        let (a, b) = found.expect("a collision must exist");
        assert_eq!(hash_category(&a, 4), hash_category(&b, 4));
        assert_ne!(a, b);
    }

    #[test]
    fn standardizer_population_convention() {
        let (m, s) = fit_standardizer(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((s - math::sqrt(2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(fit_standardizer(&[5.0, 5.0, 5.0]), (5.0, 1.0));
        assert_eq!(fit_standardizer(&[0.0]), (0.0, 1.0));
    }

    #[test]
    fn missing_label_and_kind_checks() {
        let err = Dataset::new(
            vec![ColumnSchema {
                name: "x".to_string(),
                kind: ColumnKind::Numeric,
                missing_policy: MissingPolicy::FillZero,
            }],
            vec![Column::Numeric(vec![1.0])],
            vec![2],
        )
        .unwrap_err();
        assert!(matches!(err, DataError::InvalidLabel { row: 0 }));
    }

    proptest! {
        #[test]
        fn split_partitions_are_disjoint_and_exhaustive(seed in any::<u64>(), rows in 3usize..200) {
            let ds = toy(rows);
            let spec = SplitSpec {
                train_fraction: 0.6,
                valid_fraction: 0.2,
                test_fraction: 0.2,
                seed,
            };
            if let Ok((tr, va, te)) = split(&ds, &spec) {
                let mut seen: Vec<f64> = Vec::new();
                for part in [&tr, &va, &te] {
                    if let Column::Numeric(v) = &part.columns[0] {
                        seen.extend_from_slice(v);
                    }
                }
                prop_assert_eq!(seen.len(), rows);
                let mut sorted = seen.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                for (i, v) in sorted.iter().enumerate() {
                    prop_assert_eq!(*v, i as f64);
                }
            }
        }
    }
}
