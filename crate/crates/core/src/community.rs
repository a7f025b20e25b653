//! Labeling-platform state: tasks, volunteers, sessions and votes.
//!
//! [`Platform`] is a deterministic state machine. Every mutation is split into
//! a `plan_*` step that validates a request against the current state and
//! returns the event to persist, and an `apply_*` step that folds a persisted
//! event into the state. Replaying the persisted events through the `apply_*`
//! methods rebuilds the same state, so the event logs are the source of truth.
//!
//! Rules enforced here:
//! * a task takes at most [`VOTE_CAP`] public votes, one per volunteer;
//! * a volunteer must finish the [`INTRO_TASK_COUNT`]-task introduction before
//!   regular sessions, whose votes go to a separate tally;
//! * a session serves at most [`SESSION_SIZE`] tasks and flags a stop point
//!   after every [`STOP_POINT_INTERVAL`] votes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::compute_agreement;
use crate::corpus::LabeledSnippet;
use crate::sdg::SdgId;

pub const VOTE_CAP: u32 = 9;
pub const SESSION_SIZE: usize = 100;
pub const STOP_POINT_INTERVAL: usize = 20;
pub const INTRO_TASK_COUNT: usize = 10;
pub const DEFAULT_MIN_VALIDATORS: u32 = 3;

pub type TaskId = String;
pub type VolunteerId = String;
pub type SessionId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SessionMode {
    /// The fixed introductory exercise.
    Intro,
    /// Tasks with any candidate goal, in random order.
    Mixed,
    /// Tasks whose candidate goal is `sdg` only.
    SingleSdg { sdg: SdgId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTask {
    pub task_id: TaskId,
    pub snippet: String,
    pub candidate_sdg: SdgId,
    pub source_ref: Option<String>,
    pub accepts: u32,
    pub rejects: u32,
}

impl LabelTask {
    pub fn total_votes(&self) -> u32 {
        self.accepts + self.rejects
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: SessionId,
    pub volunteer_id: VolunteerId,
    pub mode: SessionMode,
    pub task_ids: Vec<TaskId>,
    /// Number of tasks voted on so far.
    pub cursor: usize,
    pub seed: u64,
    pub opened_at: u64,
    pub completed_at: Option<u64>,
    /// Tasks removed from this session because they reached the vote cap.
    pub retired: BTreeSet<TaskId>,
}

impl Session {
    pub fn is_complete(&self) -> bool {
        self.cursor >= self.task_ids.len()
    }

    pub fn current_task(&self) -> Option<&TaskId> {
        self.task_ids.get(self.cursor)
    }
}

/// Persisted session lifecycle records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Opened {
        session_id: SessionId,
        volunteer_id: VolunteerId,
        #[serde(flatten)]
        mode: SessionMode,
        task_ids: Vec<TaskId>,
        seed: u64,
        timestamp: u64,
    },
    /// The task at `position` (0-based) hit the vote cap and was replaced, or
    /// dropped when no replacement was eligible.
    Substituted {
        session_id: SessionId,
        position: usize,
        retired: TaskId,
        replacement: Option<TaskId>,
        timestamp: u64,
    },
}

/// One persisted vote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub volunteer_id: VolunteerId,
    pub task_id: TaskId,
    pub decision: Decision,
    pub timestamp: u64,
    pub session_id: SessionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task {
        task: LabelTask,
        /// 1-based position of the task within the session.
        position: usize,
        session_length: usize,
        /// Set when the previous vote completed a multiple of the stop-point
        /// interval.
        is_stop_point: bool,
    },
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub task_id: TaskId,
    pub accepts: u32,
    pub rejects: u32,
    /// Votes cast in this session so far.
    pub votes_in_session: usize,
    pub session_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroTaskStats {
    pub task_id: TaskId,
    pub my_decision: Decision,
    pub community_accept_fraction: f64,
    pub community_votes: u32,
}

/// What a vote request turns into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VotePlan {
    Cast(Vote),
    /// The task is full: persist the substitution, then report
    /// [`CommunityError::VoteCapReached`].
    Retire(SessionEvent),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntroPlan {
    Resume(SessionId),
    Open(SessionEvent),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommunityError {
    #[error("intro configuration must list exactly {INTRO_TASK_COUNT} distinct known tasks: {0}")]
    InvalidIntroConfig(String),
    #[error("task {0} appears more than once in the inventory")]
    DuplicateTask(TaskId),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("volunteer {0} has already completed the introduction")]
    AlreadyOnboarded(VolunteerId),
    #[error("volunteer {0} has not completed the introduction")]
    NotOnboarded(VolunteerId),
    #[error("volunteer {0} has not completed the introduction")]
    IntroIncomplete(VolunteerId),
    #[error("volunteer {volunteer_id} already has open session {session_id}")]
    OpenSessionExists {
        volunteer_id: VolunteerId,
        session_id: SessionId,
    },
    #[error("no eligible tasks for volunteer {0}")]
    NoEligibleTasks(VolunteerId),
    #[error("session {0} is complete")]
    SessionComplete(SessionId),
    #[error("volunteer {volunteer_id} already voted on task {task_id}")]
    DuplicateVote {
        volunteer_id: VolunteerId,
        task_id: TaskId,
    },
    #[error("task {task_id} reached the vote cap; session substituted {substitute:?}")]
    VoteCapReached {
        task_id: TaskId,
        substitute: Option<TaskId>,
    },
    #[error("task {0} was retired from this session")]
    TaskRetired(TaskId),
    #[error("expected a vote on {expected}, got {got}")]
    OutOfOrder { expected: TaskId, got: TaskId },
    #[error("event log is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Default)]
struct VolunteerState {
    voted: BTreeSet<TaskId>,
    intro_decisions: BTreeMap<TaskId, Decision>,
    intro_session: Option<SessionId>,
    sessions: Vec<SessionId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    accepts: u32,
    rejects: u32,
}

impl Tally {
    fn add(&mut self, d: Decision) {
        match d {
            Decision::Accept => self.accepts += 1,
            Decision::Reject => self.rejects += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Platform {
    tasks: BTreeMap<TaskId, LabelTask>,
    intro_task_ids: Vec<TaskId>,
    intro_tallies: BTreeMap<TaskId, Tally>,
    volunteers: BTreeMap<VolunteerId, VolunteerState>,
    sessions: BTreeMap<SessionId, Session>,
    public_pairs: BTreeSet<(VolunteerId, TaskId)>,
    session_count: u64,
    seed: u64,
}

fn mix(seed: u64, n: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ n.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Platform {
    /// `tasks` must have zero votes and distinct ids; `intro_task_ids` must name
    /// exactly ten of them.
    pub fn new(tasks: Vec<LabelTask>, intro_task_ids: Vec<TaskId>, seed: u64) -> Result<Self, CommunityError> {
        let mut map = BTreeMap::new();
        for mut t in tasks {
            t.accepts = 0;
            t.rejects = 0;
            let id = t.task_id.clone();
            if map.insert(id.clone(), t).is_some() {
                return Err(CommunityError::DuplicateTask(id));
            }
        }
        let distinct: BTreeSet<&TaskId> = intro_task_ids.iter().collect();
        if intro_task_ids.len() != INTRO_TASK_COUNT || distinct.len() != INTRO_TASK_COUNT {
            return Err(CommunityError::InvalidIntroConfig(format!(
                "got {} id(s), {} distinct",
                intro_task_ids.len(),
                distinct.len()
            )));
        }
        if let Some(missing) = intro_task_ids.iter().find(|id| !map.contains_key(*id)) {
            return Err(CommunityError::InvalidIntroConfig(format!("unknown task {missing}")));
        }
        Ok(Platform {
            intro_tallies: intro_task_ids.iter().map(|id| (id.clone(), Tally::default())).collect(),
            tasks: map,
            intro_task_ids,
            volunteers: BTreeMap::new(),
            sessions: BTreeMap::new(),
            public_pairs: BTreeSet::new(),
            session_count: 0,
            seed,
        })
    }

    pub fn tasks(&self) -> impl Iterator<Item = &LabelTask> {
        self.tasks.values()
    }

    pub fn task(&self, id: &str) -> Option<&LabelTask> {
        self.tasks.get(id)
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn intro_task_ids(&self) -> &[TaskId] {
        &self.intro_task_ids
    }

    pub fn is_onboarded(&self, volunteer_id: &str) -> bool {
        self.volunteers
            .get(volunteer_id)
            .is_some_and(|v| v.intro_decisions.len() == INTRO_TASK_COUNT)
    }

    /// Tasks the volunteer has voted on, introduction included.
    pub fn voted_task_ids(&self, volunteer_id: &str) -> BTreeSet<TaskId> {
        self.volunteers.get(volunteer_id).map(|v| v.voted.clone()).unwrap_or_default()
    }

    /// Public `(accepts, rejects)` per task.
    pub fn tallies(&self) -> BTreeMap<TaskId, (u32, u32)> {
        self.tasks.iter().map(|(id, t)| (id.clone(), (t.accepts, t.rejects))).collect()
    }

    fn open_session_of(&self, volunteer_id: &str) -> Option<&Session> {
        let v = self.volunteers.get(volunteer_id)?;
        v.intro_session
            .iter()
            .chain(&v.sessions)
            .filter_map(|id| self.sessions.get(id))
            .find(|s| !s.is_complete())
    }

    fn next_session_id(&self) -> (SessionId, u64) {
        let n = self.session_count + 1;
        (format!("s{n}"), mix(self.seed, n))
    }

    fn is_eligible(&self, task: &LabelTask, voted: Option<&BTreeSet<TaskId>>, mode: SessionMode) -> bool {
        task.total_votes() < VOTE_CAP
            && !voted.is_some_and(|v| v.contains(&task.task_id))
            && match mode {
                SessionMode::SingleSdg { sdg } => task.candidate_sdg == sdg,
                SessionMode::Mixed => true,
                SessionMode::Intro => false,
            }
    }

    pub fn plan_start_intro(&self, volunteer_id: &str, now: u64) -> Result<IntroPlan, CommunityError> {
        if self.is_onboarded(volunteer_id) {
            return Err(CommunityError::AlreadyOnboarded(volunteer_id.into()));
        }
        if let Some(id) = self.volunteers.get(volunteer_id).and_then(|v| v.intro_session.clone()) {
            return Ok(IntroPlan::Resume(id));
        }
        let (session_id, seed) = self.next_session_id();
        Ok(IntroPlan::Open(SessionEvent::Opened {
            session_id,
            volunteer_id: volunteer_id.into(),
            mode: SessionMode::Intro,
            task_ids: self.intro_task_ids.clone(),
            seed,
            timestamp: now,
        }))
    }

    /// Picks up to [`SESSION_SIZE`] eligible tasks in a seeded random order.
    pub fn plan_start_session(&self, volunteer_id: &str, mode: SessionMode, now: u64) -> Result<SessionEvent, CommunityError> {
        if mode == SessionMode::Intro {
            return match self.plan_start_intro(volunteer_id, now)? {
                IntroPlan::Open(e) => Ok(e),
                IntroPlan::Resume(session_id) => Err(CommunityError::OpenSessionExists {
                    volunteer_id: volunteer_id.into(),
                    session_id,
                }),
            };
        }
        if !self.is_onboarded(volunteer_id) {
            return Err(CommunityError::NotOnboarded(volunteer_id.into()));
        }
        if let Some(open) = self.open_session_of(volunteer_id) {
            return Err(CommunityError::OpenSessionExists {
                volunteer_id: volunteer_id.into(),
                session_id: open.session_id.clone(),
            });
        }
        let voted = self.volunteers.get(volunteer_id).map(|v| &v.voted);
        let mut pool: Vec<TaskId> = self
            .tasks
            .values()
            .filter(|t| self.is_eligible(t, voted, mode))
            .map(|t| t.task_id.clone())
            .collect();
        if pool.is_empty() {
            return Err(CommunityError::NoEligibleTasks(volunteer_id.into()));
        }
        let (session_id, seed) = self.next_session_id();
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        pool.truncate(SESSION_SIZE);
        Ok(SessionEvent::Opened {
            session_id,
            volunteer_id: volunteer_id.into(),
            mode,
            task_ids: pool,
            seed,
            timestamp: now,
        })
    }

    pub fn next_task(&self, session_id: &str) -> Result<NextTask, CommunityError> {
        let s = self
            .sessions
            .get(session_id)
            .ok_or_else(|| CommunityError::UnknownSession(session_id.into()))?;
        let Some(task_id) = s.current_task() else {
            return Ok(NextTask::Complete);
        };
        let task = self.tasks[task_id].clone();
        Ok(NextTask::Task {
            task,
            position: s.cursor + 1,
            session_length: s.task_ids.len(),
            is_stop_point: s.cursor > 0 && s.cursor % STOP_POINT_INTERVAL == 0,
        })
    }

    pub fn plan_vote(
        &self,
        session_id: &str,
        task_id: &str,
        decision: Decision,
        now: u64,
    ) -> Result<VotePlan, CommunityError> {
        let s = self
            .sessions
            .get(session_id)
            .ok_or_else(|| CommunityError::UnknownSession(session_id.into()))?;
        let Some(current) = s.current_task() else {
            return Err(CommunityError::SessionComplete(session_id.into()));
        };
        let already = self
            .volunteers
            .get(&s.volunteer_id)
            .is_some_and(|v| v.voted.contains(task_id));
        if already {
            return Err(CommunityError::DuplicateVote {
                volunteer_id: s.volunteer_id.clone(),
                task_id: task_id.into(),
            });
        }
        if s.retired.contains(task_id) {
            return Err(CommunityError::TaskRetired(task_id.into()));
        }
        if current != task_id {
            return Err(CommunityError::OutOfOrder {
                expected: current.clone(),
                got: task_id.into(),
            });
        }
        let intro = s.mode == SessionMode::Intro;
        if !intro && self.tasks[task_id].total_votes() >= VOTE_CAP {
            return Ok(VotePlan::Retire(SessionEvent::Substituted {
                session_id: session_id.into(),
                position: s.cursor,
                retired: task_id.into(),
                replacement: self.pick_substitute(s),
                timestamp: now,
            }));
        }
        Ok(VotePlan::Cast(Vote {
            volunteer_id: s.volunteer_id.clone(),
            task_id: task_id.into(),
            decision,
            timestamp: now,
            session_id: session_id.into(),
        }))
    }

    fn pick_substitute(&self, s: &Session) -> Option<TaskId> {
        let voted = self.volunteers.get(&s.volunteer_id).map(|v| &v.voted);
        let in_session: BTreeSet<&TaskId> = s.task_ids.iter().chain(&s.retired).collect();
        let candidates: Vec<&TaskId> = self
            .tasks
            .values()
            .filter(|t| !in_session.contains(&t.task_id) && self.is_eligible(t, voted, s.mode))
            .map(|t| &t.task_id)
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(s.seed, s.retired.len() as u64 + 1));
        Some(candidates[rng.gen_range(0..candidates.len())].clone())
    }

    pub fn apply_session_event(&mut self, event: &SessionEvent) -> Result<(), CommunityError> {
        match event {
            SessionEvent::Opened {
                session_id,
                volunteer_id,
                mode,
                task_ids,
                seed,
                timestamp,
            } => {
                if self.sessions.contains_key(session_id) {
                    return Err(CommunityError::Inconsistent(format!("session {session_id} opened twice")));
                }
                if let Some(t) = task_ids.iter().find(|t| !self.tasks.contains_key(*t)) {
                    return Err(CommunityError::UnknownTask(t.clone()));
                }
                let v = self.volunteers.entry(volunteer_id.clone()).or_default();
                if *mode == SessionMode::Intro {
                    v.intro_session = Some(session_id.clone());
                } else {
                    v.sessions.push(session_id.clone());
                }
                self.session_count += 1;
                self.sessions.insert(
                    session_id.clone(),
                    Session {
                        session_id: session_id.clone(),
                        volunteer_id: volunteer_id.clone(),
                        mode: *mode,
                        task_ids: task_ids.clone(),
                        cursor: 0,
                        seed: *seed,
                        opened_at: *timestamp,
                        completed_at: None,
                        retired: BTreeSet::new(),
                    },
                );
            }
            SessionEvent::Substituted {
                session_id,
                position,
                retired,
                replacement,
                timestamp,
            } => {
                let s = self
                    .sessions
                    .get_mut(session_id)
                    .ok_or_else(|| CommunityError::UnknownSession(session_id.clone()))?;
                if s.task_ids.get(*position) != Some(retired) {
                    return Err(CommunityError::Inconsistent(format!(
                        "substitution of {retired} at {position} in {session_id}"
                    )));
                }
                match replacement {
                    Some(r) => s.task_ids[*position] = r.clone(),
                    None => {
                        s.task_ids.remove(*position);
                    }
                }
                s.retired.insert(retired.clone());
                if s.is_complete() && s.completed_at.is_none() {
                    s.completed_at = Some(*timestamp);
                }
            }
        }
        Ok(())
    }

    /// Folds one vote into the state. During replay the session's current
    /// task must already reflect any later substitution at that position,
    /// which holds when all session events are applied before the votes.
    pub fn apply_vote(&mut self, vote: &Vote) -> Result<VoteOutcome, CommunityError> {
        let s = self
            .sessions
            .get_mut(&vote.session_id)
            .ok_or_else(|| CommunityError::UnknownSession(vote.session_id.clone()))?;
        if s.volunteer_id != vote.volunteer_id || s.current_task() != Some(&vote.task_id) {
            return Err(CommunityError::Inconsistent(format!(
                "vote by {} on {} does not match session {}",
                vote.volunteer_id, vote.task_id, vote.session_id
            )));
        }
        let intro = s.mode == SessionMode::Intro;
        s.cursor += 1;
        if s.is_complete() {
            s.completed_at = Some(vote.timestamp);
        }
        let votes_in_session = s.cursor;
        let session_complete = s.is_complete();

        let v = self.volunteers.entry(vote.volunteer_id.clone()).or_default();
        if !v.voted.insert(vote.task_id.clone()) {
            return Err(CommunityError::DuplicateVote {
                volunteer_id: vote.volunteer_id.clone(),
                task_id: vote.task_id.clone(),
            });
        }
        let tally = if intro {
            v.intro_decisions.insert(vote.task_id.clone(), vote.decision);
            let t = self.intro_tallies.get_mut(&vote.task_id).ok_or_else(|| {
                CommunityError::Inconsistent(format!("intro vote on non-intro task {}", vote.task_id))
            })?;
            t.add(vote.decision);
            *t
        } else {
            self.public_pairs.insert((vote.volunteer_id.clone(), vote.task_id.clone()));
            let task = self
                .tasks
                .get_mut(&vote.task_id)
                .ok_or_else(|| CommunityError::UnknownTask(vote.task_id.clone()))?;
            if task.total_votes() >= VOTE_CAP {
                return Err(CommunityError::Inconsistent(format!("task {} exceeds the vote cap", vote.task_id)));
            }
            match vote.decision {
                Decision::Accept => task.accepts += 1,
                Decision::Reject => task.rejects += 1,
            }
            Tally {
                accepts: task.accepts,
                rejects: task.rejects,
            }
        };
        Ok(VoteOutcome {
            task_id: vote.task_id.clone(),
            accepts: tally.accepts,
            rejects: tally.rejects,
            votes_in_session,
            session_complete,
        })
    }

    pub fn intro_stats(&self, volunteer_id: &str) -> Result<Vec<IntroTaskStats>, CommunityError> {
        if !self.is_onboarded(volunteer_id) {
            return Err(CommunityError::IntroIncomplete(volunteer_id.into()));
        }
        let mine = &self.volunteers[volunteer_id].intro_decisions;
        Ok(self
            .intro_task_ids
            .iter()
            .map(|id| {
                let t = self.intro_tallies[id];
                let total = t.accepts + t.rejects;
                IntroTaskStats {
                    task_id: id.clone(),
                    my_decision: mine[id],
                    community_accept_fraction: f64::from(t.accepts) / f64::from(total),
                    community_votes: total,
                }
            })
            .collect())
    }

    /// Tasks with at least `min_validators` public votes, as dataset rows
    /// ordered by task id with freshly computed agreement.
    pub fn export_rows(&self, min_validators: u32) -> Vec<LabeledSnippet> {
        self.tasks
            .values()
            .filter(|t| t.total_votes() >= min_validators.max(1))
            .map(|t| LabeledSnippet {
                text_id: t.task_id.clone(),
                source_ref: t.source_ref.clone(),
                text: t.snippet.clone(),
                sdg: t.candidate_sdg,
                labels_positive: t.accepts,
                labels_negative: t.rejects,
                agreement: compute_agreement(t.accepts, t.rejects).expect("at least one vote"),
            })
            .collect()
    }
}
