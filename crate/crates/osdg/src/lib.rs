//! File formats, training, translation backends, the labeling store and the
//! HTTP service built on top of `osdg-core`.

pub mod cli;
pub mod community_store;
pub mod config;
pub mod corpus_io;
pub mod extract;
pub mod feedback;
pub mod model_io;
pub mod ontology_io;
pub mod service;
pub mod targets;
pub mod train;
pub mod translate;
