//! Training and evaluation of the sixteen goal models from a labeled corpus.

use std::collections::BTreeMap;
use std::thread;

use osdg_core::corpus::CorpusError;
use osdg_core::features::VocabularyError;
use osdg_core::metrics::{always_positive_f1, BinaryMetrics};
use osdg_core::model_set::ModelSetError;
use osdg_core::{build_vocabulary, Corpus, OvrModel, OvrModelSet, SdgId, TrainConfig, TrainError, TrainingSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub min_agreement: f64,
    pub require_positive_majority: bool,
    pub test_fraction: f64,
    pub min_df: usize,
    pub max_features: usize,
    pub model: TrainConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            min_agreement: 0.6,
            require_positive_majority: true,
            test_fraction: 0.2,
            min_df: 5,
            max_features: 50_000,
            model: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("cannot build vocabulary: {0}")]
    Vocabulary(#[from] VocabularyError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    ModelSet(#[from] ModelSetError),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
}

impl TrainingError {
    /// Divergence is a runtime failure; everything else is a problem with the
    /// data or the options.
    pub fn is_runtime(&self) -> bool {
        matches!(self, TrainingError::Train(TrainError::Diverged { .. }))
    }
}

/// Curates and splits a corpus: SDG 17 dropped, agreement filter applied,
/// then a stratified split. Returns `(train, test)`.
pub fn prepare_split(corpus: &Corpus, options: &TrainOptions) -> Result<(Corpus, Corpus), TrainingError> {
    let curated = corpus
        .without_excluded()
        .filter_high_agreement(options.min_agreement, options.require_positive_majority);
    let (train, test) = curated.split(options.test_fraction, options.model.seed)?;
    Ok((train, test))
}

/// Trains all sixteen models, one thread per goal up to the available cores.
pub fn train_model_set(train: &Corpus, options: &TrainOptions) -> Result<OvrModelSet, TrainingError> {
    if train.is_empty() {
        return Err(TrainingError::EmptySplit("train"));
    }
    let vocabulary = build_vocabulary(train, options.min_df, options.max_features)?;
    let set = TrainingSet::new(train, &vocabulary);
    let goals: Vec<SdgId> = SdgId::trainable().collect();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(goals.len());
    let results: Vec<(SdgId, Result<OvrModel, TrainError>)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let set = &set;
                let goals = &goals;
                scope.spawn(move || {
                    goals
                        .iter()
                        .skip(w)
                        .step_by(workers)
                        .map(|&sdg| (sdg, set.train(sdg, &options.model)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("training thread panicked")).collect()
    });
    // Report the lowest failing goal so errors do not depend on scheduling.
    let mut models = BTreeMap::new();
    let mut results = results;
    results.sort_by_key(|(s, _)| *s);
    for (sdg, r) in results {
        models.insert(sdg, r?);
    }
    Ok(OvrModelSet::new(vocabulary, models)?)
}

/// Held-out metrics for each goal, using the same labeling rule as training.
/// Rows with tied votes for a goal are left out of that goal's evaluation.
pub fn evaluate(model_set: &OvrModelSet, test: &Corpus) -> Result<Vec<BinaryMetrics>, TrainingError> {
    if test.is_empty() {
        return Err(TrainingError::EmptySplit("test"));
    }
    let set = TrainingSet::new(test, model_set.vocabulary());
    Ok(model_set
        .models()
        .iter()
        .map(|(&sdg, m)| {
            let (scores, labels): (Vec<f64>, Vec<bool>) = set
                .labels_for(sdg)
                .into_iter()
                .zip(set.features())
                .filter_map(|(y, x)| y.map(|y| (m.probability(x), y)))
                .unzip();
            BinaryMetrics::compute(sdg, &scores, &labels, m.threshold)
        })
        .collect())
}

/// F1 of predicting every evaluated row positive, per goal, on `test`.
pub fn baseline_f1(test: &Corpus, model_set: &OvrModelSet) -> BTreeMap<SdgId, f64> {
    let set = TrainingSet::new(test, model_set.vocabulary());
    SdgId::trainable()
        .map(|sdg| {
            let labels: Vec<bool> = set.labels_for(sdg).into_iter().flatten().collect();
            (sdg, always_positive_f1(&labels))
        })
        .collect()
}

/// Fixed-width table of per-goal metrics for terminal output.
pub fn metrics_table(metrics: &[BinaryMetrics]) -> String {
    let mut out = format!("{:>4} {:>9} {:>9} {:>9} {:>9} {:>8}\n", "sdg", "precision", "recall", "f1", "auc", "support");
    for m in metrics {
        out.push_str(&format!(
            "{:>4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8}\n",
            m.sdg, m.precision, m.recall, m.f1, m.auc, m.support
        ));
    }
    out
}
