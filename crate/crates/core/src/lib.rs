//! Allocation-only core of the OSDG text classifier.
//!
//! Everything in this crate is pure computation over in-memory values:
//! tokenization, token-level keyword matching, TF-IDF features, one-vs-rest
//! logistic models, the two-stage dual-agreement pipeline with document
//! aggregation, and the labeling-platform state machine. File formats,
//! HTTP and the command line live in the `osdg` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod agreement;
pub mod community;
pub mod corpus;
pub mod features;
pub mod hash;
pub mod logistic;
mod math;
pub mod metrics;
pub mod model_set;
pub mod ontology;
pub mod pipeline;
pub mod sdg;
pub mod tokenize;

pub use agreement::{compute_agreement, ZeroVotes};
pub use corpus::{Corpus, CorpusError, LabeledSnippet};
pub use features::{build_vocabulary, featurize, FeatureVector, Vocabulary};
pub use logistic::{train_ovr, OvrModel, TrainConfig, TrainError, TrainingMeta, TrainingSet};
pub use model_set::{ml_labels, OvrModelSet};
pub use ontology::{evidence_sdgs, match_keywords, KeywordMatch, Ontology, OntologyTerm};
pub use pipeline::{
    chunk_document, AggregationConfig, ClassificationResult, Classifier, DocumentResult,
    PipelineError, Translator,
};
pub use sdg::{LanguageCode, SdgId};
pub use tokenize::{tokenize, Token};
