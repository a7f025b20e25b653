//! Loading keyword ontologies from `sdg,term` CSV files.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use osdg_core::ontology::{OntologyError, OntologyWarning};
use osdg_core::{Ontology, SdgId};
use thiserror::Error;

/// Version label of the bundled seed ontology.
pub const SEED_VERSION: &str = "seed-v1";

const SEED_CSV: &str = include_str!("../data/seed_ontology.csv");

#[derive(Debug, Error)]
pub enum OntologyIoError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed header: expected sdg,term, found {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected 2 fields, found {found}")]
    FieldCount { line: u64, found: usize },
    #[error("line {line}: invalid SDG {value:?}, expected an integer in 1..=17")]
    InvalidSdg { line: u64, value: String },
    #[error(transparent)]
    Term(#[from] OntologyError),
}

/// Loads an ontology file. The version is the file stem, so
/// `seed_ontology.csv` becomes `seed_ontology`.
pub fn load_ontology(path: impl AsRef<Path>) -> Result<(Ontology, Vec<OntologyWarning>), OntologyIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| OntologyIoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let version = path.file_stem().map_or_else(|| "unversioned".into(), |s| s.to_string_lossy().into_owned());
    read_ontology(file, &version)
}

pub fn read_ontology<R: Read>(reader: R, version: &str) -> Result<(Ontology, Vec<OntologyWarning>), OntologyIoError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = csv
        .headers()?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_string())
        .collect();
    if header != ["sdg", "term"] {
        return Err(OntologyIoError::MalformedHeader(header.join(",")));
    }
    let mut entries = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(OntologyIoError::FieldCount { line, found: record.len() });
        }
        let raw = record[0].trim();
        let sdg = raw
            .parse::<i64>()
            .ok()
            .and_then(|v| SdgId::new(v).ok())
            .ok_or_else(|| OntologyIoError::InvalidSdg {
                line,
                value: raw.to_string(),
            })?;
        entries.push((sdg, record[1].to_string()));
    }
    Ok(Ontology::new(version, entries)?)
}

/// The seed ontology shipped with this crate.
pub fn seed_ontology() -> Ontology {
    read_ontology(SEED_CSV.as_bytes(), SEED_VERSION)
        .expect("bundled seed ontology is valid")
        .0
}
