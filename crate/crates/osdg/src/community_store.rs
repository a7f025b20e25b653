//! File-backed store for the labeling platform.
//!
//! A store directory holds:
//!
//! * `tasks.csv`: the task pool in dataset CSV layout (vote columns ignored);
//! * `intro_tasks.json`: `{"task_ids": [...]}` with the ten intro tasks;
//! * `sessions.ndjson`, `votes.ndjson`, `intro_votes.ndjson`: append-only
//!   event logs, one JSON object per line.
//!
//! All mutations go through one lock: the request is checked against the
//! in-memory state, the resulting event is appended and synced, and only then
//! applied. Opening a store replays the logs, so tallies always derive from
//! what is on disk.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use osdg_core::community::{
    CommunityError, Decision, IntroPlan, IntroTaskStats, LabelTask, NextTask, Platform, Session, SessionEvent,
    SessionMode, Vote, VoteOutcome, VotePlan,
};
use osdg_core::LabeledSnippet;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::{self, CorpusIoError};

pub const TASKS_FILE: &str = "tasks.csv";
pub const INTRO_FILE: &str = "intro_tasks.json";
pub const SESSIONS_FILE: &str = "sessions.ndjson";
pub const VOTES_FILE: &str = "votes.ndjson";
pub const INTRO_VOTES_FILE: &str = "intro_votes.ndjson";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("task pool: {0}")]
    Pool(#[from] CorpusIoError),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("store already initialized at {0}")]
    AlreadyInitialized(String),
    #[error(transparent)]
    Community(#[from] CommunityError),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IntroConfig {
    pub task_ids: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a task pool in dataset CSV layout. Vote columns are ignored. Rows
/// for SDG 17 are skipped unless `include_sdg17` is set.
pub fn load_pool(path: impl AsRef<Path>, include_sdg17: bool) -> Result<Vec<LabelTask>, StoreError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut tasks = Vec::new();
    for (line, row) in corpus_io::read_records(file)? {
        let row = row?;
        if row.text.trim().is_empty() {
            return Err(StoreError::Format {
                path: path.display().to_string(),
                message: format!("line {line}: empty snippet"),
            });
        }
        if row.sdg.excluded_from_training() && !include_sdg17 {
            continue;
        }
        tasks.push(LabelTask {
            task_id: row.text_id,
            snippet: row.text,
            candidate_sdg: row.sdg,
            source_ref: row.source_ref,
            accepts: 0,
            rejects: 0,
        });
    }
    Ok(tasks)
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

struct Logs {
    sessions: File,
    votes: File,
    intro_votes: File,
}

struct Inner {
    platform: Platform,
    logs: Logs,
}

pub struct CommunityStore {
    dir: PathBuf,
    inner: Mutex<Inner>,
}

fn append<T: Serialize>(file: &mut File, record: &T) -> io::Result<()> {
    let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()
}

/// Reads an NDJSON log. A trailing line without a newline is the remains of
/// an interrupted append; it was never acknowledged, so it is cut off.
fn replay_log<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        tracing::warn!(path = %path.display(), "discarding incomplete trailing record");
        let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        f.set_len(complete as u64).map_err(io_err(path))?;
        f.sync_all().map_err(io_err(path))?;
    }
    let mut out = Vec::new();
    for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let record = serde_json::from_slice(line).map_err(|e| StoreError::Format {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn open_log(path: &Path) -> Result<File, StoreError> {
    OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))
}

impl CommunityStore {
    /// Creates a store directory from a task pool and the intro task list.
    pub fn init(dir: impl AsRef<Path>, tasks: &[LabelTask], intro_task_ids: &[String]) -> Result<(), StoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        if dir.join(TASKS_FILE).exists() || dir.join(SESSIONS_FILE).exists() {
            return Err(StoreError::AlreadyInitialized(dir.display().to_string()));
        }
        // Validates ids before anything is written.
        Platform::new(tasks.to_vec(), intro_task_ids.to_vec(), 0)?;
        let rows: Vec<LabeledSnippet> = tasks
            .iter()
            .map(|t| LabeledSnippet {
                text_id: t.task_id.clone(),
                source_ref: t.source_ref.clone(),
                text: t.snippet.clone(),
                sdg: t.candidate_sdg,
                labels_positive: 0,
                labels_negative: 0,
                agreement: 0.0,
            })
            .collect();
        corpus_io::write_corpus(dir.join(TASKS_FILE), &rows)?;
        let intro = serde_json::to_string_pretty(&IntroConfig {
            task_ids: intro_task_ids.to_vec(),
        })
        .expect("intro config serializes");
        let path = dir.join(INTRO_FILE);
        fs::write(&path, intro).map_err(io_err(&path))?;
        Ok(())
    }

    /// Opens a store and replays its logs. `seed` drives the task order of
    /// sessions opened from now on.
    pub fn open(dir: impl AsRef<Path>, seed: u64) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        let tasks = load_pool(dir.join(TASKS_FILE), true)?;
        let intro_path = dir.join(INTRO_FILE);
        let intro_text = fs::read_to_string(&intro_path).map_err(io_err(&intro_path))?;
        let intro: IntroConfig = serde_json::from_str(&intro_text).map_err(|e| StoreError::Format {
            path: intro_path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut platform = Platform::new(tasks, intro.task_ids, seed)?;

        // Session events first: a substitution only rewrites positions at or
        // after the session cursor, so votes replay against final task lists.
        let session_events: Vec<SessionEvent> = replay_log(&dir.join(SESSIONS_FILE))?;
        for e in &session_events {
            platform.apply_session_event(e)?;
        }
        let votes: Vec<Vote> = replay_log(&dir.join(VOTES_FILE))?;
        let intro_votes: Vec<Vote> = replay_log(&dir.join(INTRO_VOTES_FILE))?;
        for v in intro_votes.iter().chain(&votes) {
            platform.apply_vote(v)?;
        }
        tracing::info!(
            sessions = session_events.len(),
            votes = votes.len(),
            intro_votes = intro_votes.len(),
            "community store replayed"
        );

        let logs = Logs {
            sessions: open_log(&dir.join(SESSIONS_FILE))?,
            votes: open_log(&dir.join(VOTES_FILE))?,
            intro_votes: open_log(&dir.join(INTRO_VOTES_FILE))?,
        };
        Ok(CommunityStore {
            dir,
            inner: Mutex::new(Inner { platform, logs }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Runs `f` against a consistent snapshot of the platform state.
    pub fn read<R>(&self, f: impl FnOnce(&Platform) -> R) -> R {
        f(&self.inner.lock().unwrap().platform)
    }

    fn persist_session_event(&self, inner: &mut Inner, event: SessionEvent) -> Result<SessionEvent, StoreError> {
        append(&mut inner.logs.sessions, &event).map_err(io_err(&self.dir.join(SESSIONS_FILE)))?;
        inner.platform.apply_session_event(&event)?;
        Ok(event)
    }

    fn opened(&self, inner: &Inner, event: &SessionEvent) -> Session {
        let SessionEvent::Opened { session_id, .. } = event else {
            unreachable!("only opened events start sessions")
        };
        inner.platform.session(session_id).expect("session was just applied").clone()
    }

    /// Opens the intro session, or returns the volunteer's unfinished one.
    pub fn start_intro(&self, volunteer_id: &str) -> Result<Session, StoreError> {
        let mut inner = self.inner.lock().unwrap();
        match inner.platform.plan_start_intro(volunteer_id, now_millis())? {
            IntroPlan::Resume(id) => Ok(inner.platform.session(&id).expect("known session").clone()),
            IntroPlan::Open(event) => {
                let event = self.persist_session_event(&mut inner, event)?;
                Ok(self.opened(&inner, &event))
            }
        }
    }

    pub fn start_session(&self, volunteer_id: &str, mode: SessionMode) -> Result<Session, StoreError> {
        if mode == SessionMode::Intro {
            return self.start_intro(volunteer_id);
        }
        let mut inner = self.inner.lock().unwrap();
        let event = inner.platform.plan_start_session(volunteer_id, mode, now_millis())?;
        let event = self.persist_session_event(&mut inner, event)?;
        Ok(self.opened(&inner, &event))
    }

    pub fn next_task(&self, session_id: &str) -> Result<NextTask, StoreError> {
        Ok(self.read(|p| p.next_task(session_id))?)
    }

    /// Records a vote. When the task has filled up since it was served, the
    /// session gets a substitute and the call fails with `VoteCapReached`.
    pub fn record_vote(&self, session_id: &str, task_id: &str, decision: Decision) -> Result<VoteOutcome, StoreError> {
        let mut inner = self.inner.lock().unwrap();
        match inner.platform.plan_vote(session_id, task_id, decision, now_millis())? {
            VotePlan::Cast(vote) => {
                let intro = inner
                    .platform
                    .session(session_id)
                    .is_some_and(|s| s.mode == SessionMode::Intro);
                let (file, name) = if intro {
                    (&mut inner.logs.intro_votes, INTRO_VOTES_FILE)
                } else {
                    (&mut inner.logs.votes, VOTES_FILE)
                };
                append(file, &vote).map_err(io_err(&self.dir.join(name)))?;
                Ok(inner.platform.apply_vote(&vote)?)
            }
            VotePlan::Retire(event) => {
                let event = self.persist_session_event(&mut inner, event)?;
                let SessionEvent::Substituted { retired, replacement, .. } = event else {
                    unreachable!("retire plans carry substitutions")
                };
                Err(CommunityError::VoteCapReached {
                    task_id: retired,
                    substitute: replacement,
                }
                .into())
            }
        }
    }

    pub fn intro_stats(&self, volunteer_id: &str) -> Result<Vec<IntroTaskStats>, StoreError> {
        Ok(self.read(|p| p.intro_stats(volunteer_id))?)
    }

    pub fn export_rows(&self, min_validators: u32) -> Vec<LabeledSnippet> {
        self.read(|p| p.export_rows(min_validators))
    }

    /// Writes the exportable rows as dataset CSV and returns the row count.
    pub fn export_dataset(&self, path: impl AsRef<Path>, min_validators: u32) -> Result<usize, StoreError> {
        let rows = self.export_rows(min_validators);
        corpus_io::write_corpus(path, &rows)?;
        Ok(rows.len())
    }
}
