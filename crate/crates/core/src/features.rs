//! TF-IDF vocabulary and sparse feature vectors.
//!
//! Term frequency is sub-linear, `1 + ln(tf)`, and inverse document frequency
//! is smoothed, `ln((1 + N) / (1 + df)) + 1`. Vectors are L2-normalized.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::math::{ln, sqrt};
use crate::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabularyError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary has {tokens} tokens but {idf} idf weights")]
    LengthMismatch { tokens: usize, idf: usize },
    #[error("idf weight for {token:?} is not finite and positive")]
    InvalidIdf { token: String },
    #[error("token {0:?} appears more than once")]
    DuplicateToken(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
    idf: Vec<f64>,
    min_df: usize,
    max_features: usize,
}

impl Vocabulary {
    /// Reassembles a vocabulary from its stored parts (token list in index order).
    pub fn from_parts(
        tokens: Vec<String>,
        idf: Vec<f64>,
        min_df: usize,
        max_features: usize,
    ) -> Result<Self, VocabularyError> {
        if tokens.len() != idf.len() {
            return Err(VocabularyError::LengthMismatch {
                tokens: tokens.len(),
                idf: idf.len(),
            });
        }
        let mut index = BTreeMap::new();
        for (i, (tok, &w)) in tokens.iter().zip(&idf).enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(VocabularyError::InvalidIdf { token: tok.clone() });
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(VocabularyError::DuplicateToken(tok.clone()));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            idf,
            min_df,
            max_features,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|i| self.idf[i as usize])
    }
}

/// Builds the vocabulary over the corpus texts.
///
/// Tokens need a document frequency of at least `min_df`; of those the
/// `max_features` most frequent are kept, ties broken lexicographically.
/// Feature indices follow lexicographic token order.
pub fn build_vocabulary(corpus: &Corpus, min_df: usize, max_features: usize) -> Result<Vocabulary, VocabularyError> {
    vocabulary_from_documents(corpus.iter().map(|s| s.text.as_str()), min_df, max_features)
}

pub fn vocabulary_from_documents<'a, I>(docs: I, min_df: usize, max_features: usize) -> Result<Vocabulary, VocabularyError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_docs = 0usize;
    for doc in docs {
        n_docs += 1;
        let unique: BTreeSet<String> = tokenize(doc).into_iter().map(|t| t.text).collect();
        for tok in unique {
            *df.entry(tok).or_default() += 1;
        }
    }
    if n_docs == 0 {
        return Err(VocabularyError::EmptyCorpus);
    }
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|&(_, d)| d >= min_df).collect();
    // BTreeMap iteration is already lexicographic; a stable sort keeps that
    // order among equal frequencies.
    kept.sort_by_key(|k| core::cmp::Reverse(k.1));
    kept.truncate(max_features);
    kept.sort_by(|a, b| a.0.cmp(&b.0));

    let n = n_docs as f64;
    let (tokens, idf): (Vec<String>, Vec<f64>) = kept
        .into_iter()
        .map(|(tok, d)| (tok, ln((1.0 + n) / (1.0 + d as f64)) + 1.0))
        .unzip();
    Vocabulary::from_parts(tokens, idf, min_df, max_features)
}

/// Sparse vector with strictly increasing indices, either all-zero or of unit
/// L2 norm.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense[i] * v).sum()
    }
}

pub fn featurize(text: &str, vocabulary: &Vocabulary) -> FeatureVector {
    let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
    for tok in tokenize(text) {
        if let Some(i) = vocabulary.index_of(&tok.text) {
            *tf.entry(i).or_default() += 1;
        }
    }
    let mut indices = Vec::with_capacity(tf.len());
    let mut values = Vec::with_capacity(tf.len());
    for (i, count) in tf {
        indices.push(i);
        values.push((1.0 + ln(count as f64)) * vocabulary.idf[i as usize]);
    }
    let norm = sqrt(values.iter().map(|v| v * v).sum());
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    FeatureVector { indices, values }
}
