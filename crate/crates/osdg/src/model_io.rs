//! JSON persistence for model sets.
//!
//! One document holds the vocabulary, its IDF weights and the sixteen models.
//! Floats are written with round-trip precision, so a reloaded model set
//! predicts bit-for-bit what the saved one did.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use osdg_core::features::VocabularyError;
use osdg_core::model_set::{ModelSetError, FORMAT_VERSION};
use osdg_core::{OvrModel, OvrModelSet, SdgId, TrainingMeta, Vocabulary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("unsupported model format {found:?}, expected {FORMAT_VERSION:?}")]
    UnsupportedVersion { found: String },
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
    #[error("model file is inconsistent: {0}")]
    Vocabulary(#[from] VocabularyError),
    #[error("model file is inconsistent: {0}")]
    ModelSet(#[from] ModelSetError),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: String,
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    min_df: usize,
    max_features: usize,
    models: BTreeMap<SdgId, ModelEntry>,
}

#[derive(Serialize, Deserialize)]
struct ModelEntry {
    weights: Vec<f64>,
    bias: f64,
    threshold: f64,
    training_meta: TrainingMeta,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<String>,
}

pub fn to_json(set: &OvrModelSet) -> String {
    let v = set.vocabulary();
    let file = ModelFile {
        format_version: set.format_version().to_string(),
        vocabulary: v.tokens().to_vec(),
        idf: v.idf().to_vec(),
        min_df: v.min_df(),
        max_features: v.max_features(),
        models: set
            .models()
            .iter()
            .map(|(&s, m)| {
                (
                    s,
                    ModelEntry {
                        weights: m.weights.clone(),
                        bias: m.bias,
                        threshold: m.threshold,
                        training_meta: m.training_meta.clone(),
                    },
                )
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("model set serializes")
}

pub fn from_json(text: &str) -> Result<OvrModelSet, ModelIoError> {
    if text.trim().is_empty() {
        return Err(ModelIoError::Corrupt("file is empty".into()));
    }
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| ModelIoError::Corrupt(e.to_string()))?;
    match probe.format_version {
        Some(v) if v == FORMAT_VERSION => {}
        Some(found) => return Err(ModelIoError::UnsupportedVersion { found }),
        None => return Err(ModelIoError::Corrupt("missing format_version".into())),
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelIoError::Corrupt(e.to_string()))?;
    let vocabulary = Vocabulary::from_parts(file.vocabulary, file.idf, file.min_df, file.max_features)?;
    let models = file
        .models
        .into_iter()
        .map(|(sdg, e)| {
            (
                sdg,
                OvrModel {
                    sdg,
                    weights: e.weights,
                    bias: e.bias,
                    threshold: e.threshold,
                    training_meta: e.training_meta,
                },
            )
        })
        .collect();
    Ok(OvrModelSet::new(vocabulary, models)?)
}

pub fn save_model_set(set: &OvrModelSet, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    let path = path.as_ref();
    fs::write(path, to_json(set)).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model_set(path: impl AsRef<Path>) -> Result<OvrModelSet, ModelIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json(&text)
}
