//! The sixteen one-vs-rest models sharing one vocabulary.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use thiserror::Error;

use crate::features::{featurize, FeatureVector, Vocabulary};
use crate::logistic::OvrModel;
use crate::sdg::SdgId;

pub const FORMAT_VERSION: &str = "osdg-ovr/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelSetError {
    #[error("model for SDG {0} is missing")]
    MissingModel(SdgId),
    #[error("SDG {0} is not a trainable goal")]
    UnexpectedModel(SdgId),
    #[error("model stored under SDG {key} is labeled SDG {model}")]
    KeyMismatch { key: SdgId, model: SdgId },
    #[error("model for SDG {sdg} has {got} weights, vocabulary has {expected}")]
    WeightLength { sdg: SdgId, got: usize, expected: usize },
    #[error("model for SDG {0} has a non-finite parameter or a threshold outside (0, 1)")]
    InvalidParameter(SdgId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvrModelSet {
    format_version: String,
    vocabulary: Vocabulary,
    models: BTreeMap<SdgId, OvrModel>,
}

impl OvrModelSet {
    /// Requires exactly one model per goal 1..=16, each sized to the vocabulary.
    pub fn new(vocabulary: Vocabulary, models: BTreeMap<SdgId, OvrModel>) -> Result<Self, ModelSetError> {
        for (&key, m) in &models {
            if key.excluded_from_training() {
                return Err(ModelSetError::UnexpectedModel(key));
            }
            if m.sdg != key {
                return Err(ModelSetError::KeyMismatch { key, model: m.sdg });
            }
            if m.weights.len() != vocabulary.len() {
                return Err(ModelSetError::WeightLength {
                    sdg: key,
                    got: m.weights.len(),
                    expected: vocabulary.len(),
                });
            }
            let finite = m.bias.is_finite() && m.weights.iter().all(|w| w.is_finite());
            if !finite || !(m.threshold > 0.0 && m.threshold < 1.0) {
                return Err(ModelSetError::InvalidParameter(key));
            }
        }
        if let Some(missing) = SdgId::trainable().find(|s| !models.contains_key(s)) {
            return Err(ModelSetError::MissingModel(missing));
        }
        Ok(OvrModelSet {
            format_version: FORMAT_VERSION.into(),
            vocabulary,
            models,
        })
    }

    pub fn format_version(&self) -> &str {
        &self.format_version
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn models(&self) -> &BTreeMap<SdgId, OvrModel> {
        &self.models
    }

    pub fn model(&self, sdg: SdgId) -> Option<&OvrModel> {
        self.models.get(&sdg)
    }

    /// Replaces one goal's model, leaving the other fifteen untouched.
    pub fn with_model(mut self, model: OvrModel) -> Result<Self, ModelSetError> {
        self.models.insert(model.sdg, model);
        OvrModelSet::new(self.vocabulary, self.models)
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        featurize(text, &self.vocabulary)
    }

    /// Independent per-goal probabilities; they need not sum to one.
    pub fn predict_proba(&self, text: &str) -> BTreeMap<SdgId, f64> {
        self.predict_features(&self.featurize(text))
    }

    pub fn predict_features(&self, x: &FeatureVector) -> BTreeMap<SdgId, f64> {
        self.models.iter().map(|(&s, m)| (s, m.probability(x))).collect()
    }
}

/// Goals whose probability reaches their model's threshold (inclusive).
pub fn ml_labels(probs: &BTreeMap<SdgId, f64>, model_set: &OvrModelSet) -> BTreeSet<SdgId> {
    probs
        .iter()
        .filter(|(s, &p)| model_set.model(**s).is_some_and(|m| p >= m.threshold))
        .map(|(&s, _)| s)
        .collect()
}
