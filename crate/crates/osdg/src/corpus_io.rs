//! Reading and writing community-dataset CSV files.
//!
//! The column layout follows the published dataset:
//! `doi,text_id,text,sdg,labels_negative,labels_positive,agreement`.
//! Files are RFC-4180 CSV. Tab-separated files with the same header are also
//! accepted, since some releases ship that way.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use osdg_core::corpus::{CorpusError, RowViolation};
use osdg_core::{Corpus, LabeledSnippet, SdgId};
use thiserror::Error;

pub const HEADER: [&str; 7] = ["doi", "text_id", "text", "sdg", "labels_negative", "labels_positive", "agreement"];

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed header: expected {expected}, found {found}")]
    MalformedHeader { expected: String, found: String },
    #[error("line {line}: expected 7 fields, found {found}")]
    FieldCount { line: u64, found: usize },
    #[error("line {line}: column {column} is not a non-negative integer: {value:?}")]
    NonIntegerCount { line: u64, column: &'static str, value: String },
    #[error("line {line}: invalid SDG {value:?}, expected an integer in 1..=17")]
    InvalidSdg { line: u64, value: String },
    #[error("line {line}: agreement is not a number: {value:?}")]
    InvalidAgreement { line: u64, value: String },
    #[error("line {line}: {violation}")]
    Violation { line: u64, violation: RowViolation },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl CorpusIoError {
    /// True for problems with the file's content, as opposed to IO failures.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, CorpusIoError::Open { .. } | CorpusIoError::Io(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Any invalid row aborts the load; stored agreement is recomputed and checked.
    Strict,
    /// Invalid rows are dropped and counted; stored agreement is trusted.
    Lenient,
}

#[derive(Debug)]
pub struct LoadReport {
    pub corpus: Corpus,
    /// Rows dropped in lenient mode, with their line numbers and reasons.
    pub dropped: Vec<(u64, String)>,
    pub warnings: Vec<String>,
}

pub fn load_community_dataset(path: impl AsRef<Path>, strictness: Strictness) -> Result<LoadReport, CorpusIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusIoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    read_community_dataset(BufReader::new(file), strictness)
}

pub fn read_community_dataset<R: Read>(reader: R, strictness: Strictness) -> Result<LoadReport, CorpusIoError> {
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for record in read_records(reader)? {
        let (line, parsed) = record;
        let row = match parsed.and_then(|row| {
            row.validate(strictness == Strictness::Strict)
                .map(|()| row)
                .map_err(|violation| CorpusIoError::Violation { line, violation })
        }) {
            Ok(row) => row,
            Err(e) if strictness == Strictness::Lenient && e.is_data_error() => {
                dropped.push((line, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    if strictness == Strictness::Lenient {
        let mut seen = std::collections::BTreeSet::new();
        rows.retain(|r| {
            let fresh = seen.insert((r.text_id.clone(), r.sdg));
            if !fresh {
                dropped.push((0, format!("duplicate row for text {} and SDG {}", r.text_id, r.sdg)));
            }
            fresh
        });
    }
    if rows.is_empty() && dropped.is_empty() {
        warnings.push("dataset contains a header but no rows".to_string());
    }
    if !dropped.is_empty() {
        warnings.push(format!("dropped {} invalid row(s)", dropped.len()));
    }
    let corpus = Corpus::new(rows)?;
    if !corpus.shared_text_ids().is_empty() {
        warnings.push(format!(
            "{} text id(s) appear under more than one SDG",
            corpus.shared_text_ids().len()
        ));
    }
    Ok(LoadReport { corpus, dropped, warnings })
}

type Record = (u64, Result<LabeledSnippet, CorpusIoError>);

/// Parses every data row without validating vote counts or agreement.
/// Each item carries the row's 1-based line number.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<Record>, CorpusIoError> {
    let mut reader = BufReader::new(reader);
    let delimiter = sniff_delimiter(&mut reader)?;
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    let found: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}').trim()).collect();
    if found != HEADER {
        return Err(CorpusIoError::MalformedHeader {
            expected: HEADER.join(","),
            found: found.join(","),
        });
    }
    let mut out = Vec::new();
    for result in csv.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        out.push((line, parse_row(&record, line)));
    }
    Ok(out)
}

fn sniff_delimiter<R: BufRead>(reader: &mut R) -> io::Result<u8> {
    let buf = reader.fill_buf()?;
    let first_line = buf.split(|&b| b == b'\n').next().unwrap_or(&[]);
    let tabs = first_line.iter().filter(|&&b| b == b'\t').count();
    let commas = first_line.iter().filter(|&&b| b == b',').count();
    Ok(if tabs > commas { b'\t' } else { b',' })
}

fn count(record: &csv::StringRecord, idx: usize, column: &'static str, line: u64) -> Result<u32, CorpusIoError> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| CorpusIoError::NonIntegerCount {
        line,
        column,
        value: raw.to_string(),
    })
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<LabeledSnippet, CorpusIoError> {
    if record.len() != HEADER.len() {
        return Err(CorpusIoError::FieldCount { line, found: record.len() });
    }
    let field = |i: usize| record.get(i).unwrap_or("");
    let doi = field(0).trim();
    let sdg_raw = field(3).trim();
    let sdg = sdg_raw
        .parse::<i64>()
        .ok()
        .and_then(|v| SdgId::new(v).ok())
        .ok_or_else(|| CorpusIoError::InvalidSdg {
            line,
            value: sdg_raw.to_string(),
        })?;
    let labels_negative = count(record, 4, "labels_negative", line)?;
    let labels_positive = count(record, 5, "labels_positive", line)?;
    let agreement_raw = field(6).trim();
    let agreement = if agreement_raw.is_empty() && labels_negative + labels_positive == 0 {
        0.0
    } else {
        agreement_raw.parse::<f64>().ok().filter(|a| a.is_finite()).ok_or_else(|| {
            CorpusIoError::InvalidAgreement {
                line,
                value: agreement_raw.to_string(),
            }
        })?
    };
    Ok(LabeledSnippet {
        text_id: field(1).trim().to_string(),
        source_ref: (!doi.is_empty()).then(|| doi.to_string()),
        text: field(2).to_string(),
        sdg,
        labels_positive,
        labels_negative,
        agreement,
    })
}

pub fn write_corpus(path: impl AsRef<Path>, rows: &[LabeledSnippet]) -> Result<(), CorpusIoError> {
    let file = File::create(path.as_ref()).map_err(|source| CorpusIoError::Open {
        path: path.as_ref().display().to_string(),
        source,
    })?;
    let mut w = io::BufWriter::new(file);
    write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

/// Writes the header and `rows` in order. Agreement uses the shortest
/// representation that parses back to the same value.
pub fn write_rows<W: Write>(writer: W, rows: &[LabeledSnippet]) -> Result<(), CorpusIoError> {
    let mut csv = csv::WriterBuilder::new().from_writer(writer);
    csv.write_record(HEADER)?;
    for r in rows {
        csv.write_record([
            r.source_ref.as_deref().unwrap_or(""),
            &r.text_id,
            &r.text,
            &r.sdg.to_string(),
            &r.labels_negative.to_string(),
            &r.labels_positive.to_string(),
            &format!("{:?}", r.agreement),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
