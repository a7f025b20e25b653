//! Append-only store for user-suggested SDG labels.
//!
//! Suggestions are kept for later review only. Nothing here is read by the
//! classifier.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use osdg_core::SdgId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUGGESTIONS_FILE: &str = "suggestions.ndjson";

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("a suggestion must name at least one SDG")]
    EmptySuggestion,
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub suggestion_id: u64,
    pub timestamp: u64,
    pub input_hash: String,
    pub text: String,
    pub suggested_sdgs: BTreeSet<SdgId>,
    pub note: Option<String>,
}

pub struct FeedbackStore {
    path: PathBuf,
    inner: Mutex<(File, u64)>,
}

impl FeedbackStore {
    /// Opens (creating if needed) the suggestion log in `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, FeedbackError> {
        let dir = dir.as_ref();
        let path = dir.join(SUGGESTIONS_FILE);
        let io = |source| FeedbackError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        let last_id = match fs::read_to_string(&path) {
            Ok(text) => {
                let mut last = 0;
                for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    let s: Suggestion = serde_json::from_str(line).map_err(|e| FeedbackError::Corrupt {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                    last = last.max(s.suggestion_id);
                }
                last
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => 0,
            Err(e) => return Err(io(e)),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| FeedbackError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(FeedbackStore {
            path,
            inner: Mutex::new((file, last_id)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends a suggestion durably and returns its id. Ids increase
    /// monotonically; identical suggestions get distinct ids.
    pub fn record_suggestion(
        &self,
        input_hash: &str,
        text: &str,
        suggested_sdgs: BTreeSet<SdgId>,
        note: Option<String>,
    ) -> Result<u64, FeedbackError> {
        if suggested_sdgs.is_empty() {
            return Err(FeedbackError::EmptySuggestion);
        }
        let mut guard = self.inner.lock().unwrap();
        let id = guard.1 + 1;
        let record = Suggestion {
            suggestion_id: id,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
            input_hash: input_hash.to_string(),
            text: text.to_string(),
            suggested_sdgs,
            note,
        };
        let mut line = serde_json::to_vec(&record).expect("suggestion serializes");
        line.push(b'\n');
        guard
            .0
            .write_all(&line)
            .and_then(|()| guard.0.sync_data())
            .map_err(|source| FeedbackError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
        guard.1 = id;
        Ok(id)
    }

    pub fn all(&self) -> Result<Vec<Suggestion>, FeedbackError> {
        let _guard = self.inner.lock().unwrap();
        let text = fs::read_to_string(&self.path).map_err(|source| FeedbackError::Io {
            path: self.path.display().to_string(),
            source,
        })?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| FeedbackError::Corrupt {
                    path: self.path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}
