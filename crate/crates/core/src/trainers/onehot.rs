//! Category vocabularies for one-hot encoding (and LDA row lookup).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Category → index map in first-appearance order. Unseen categories have no
/// index; encoders map them to an all-zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    categories: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn from_categories(categories: Vec<String>) -> Self {
        let index = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Vocab { categories, index }
    }

    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }

    pub fn index_of(&self, category: &str) -> Option<usize> {
        self.index.get(category).copied()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// One-hot vector of length `cardinality`; all zeros for unseen values.
    pub fn encode(&self, category: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.cardinality()];
        if let Some(i) = self.index_of(category) {
            v[i] = 1.0;
        }
        v
    }
}

/// Distinct values of `column` in first-appearance order.
pub fn fit_onehot(column: &[String]) -> Vocab {
    let mut categories = Vec::new();
    let mut index = BTreeMap::new();
    for v in column {
        if !index.contains_key(v) {
            index.insert(v.clone(), categories.len());
            categories.push(v.clone());
        }
    }
    Vocab { categories, index }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn col(vals: &[&str]) -> Vec<String> {
        vals.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn first_appearance_order() {
        let v = fit_onehot(&col(&["b", "a", "b"]));
        assert_eq!(v.cardinality(), 2);
        assert_eq!(v.index_of("b"), Some(0));
        assert_eq!(v.index_of("a"), Some(1));
    }

    #[test]
    fn encode_known_and_unseen() {
        let v = fit_onehot(&col(&["b", "a", "b"]));
        assert_eq!(v.encode("a"), vec![0.0, 1.0]);
        assert_eq!(v.encode("zzz"), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_column_gives_empty_vocab() {
        let v = fit_onehot(&[]);
        assert_eq!(v.cardinality(), 0);
        assert_eq!(v.encode("x"), Vec::<f64>::new());
    }
}
