//! Forced-choice experiments: list construction, sessions served to
//! participants, an append-only response log, and scoring.

mod adjudication;
mod lists;
mod runner;
mod scoring;
mod simulate;

pub use adjudication::{export_for_adjudication, import_adjudication, Adjudications};
pub use lists::{build_lists, items_from_triads, ExperimentList, Item, ListOptions, ListsFile, CATCH_PER_LIST};
pub use runner::{
    Choice, EventLog, LogEvent, Session, SessionStatus, Submission, TrialPayload, TrialResponse, Runner,
    RunnerOptions,
};
pub use scoring::{
    experiment_report, response_records, score_session, ExperimentReport, ItemOutcome, ScoringMode,
    ScoringOptions, SessionScore, CATCH_THRESHOLD,
};
pub use simulate::{simulate_participants, simulated_choice, Policy};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ChooseSubject,
    ConstructSentence,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::ChooseSubject => "choose_subject",
            Task::ConstructSentence => "construct_sentence",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "choose_subject" | "choose-subject" => Ok(Task::ChooseSubject),
            "construct_sentence" | "construct-sentence" => Ok(Task::ConstructSentence),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("catch pool has {available} items, {needed} needed")]
    InsufficientCatchPool { needed: usize, available: usize },
    #[error("no critical items")]
    NoItems,
    #[error("item {0} is both a critical and a catch item")]
    OverlappingItem(String),
    #[error("item {0} is not in the catalogue")]
    UnknownItem(String),
    #[error("unknown list {0}")]
    UnknownList(usize),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {session} has no trial {index}")]
    UnknownTrial { session: String, index: usize },
    #[error("session {session} already has a response for {item}")]
    DuplicateResponse { session: String, item: String },
    #[error("item {item} is not part of session {session}")]
    ItemNotInSession { session: String, item: String },
    #[error("expected a response for {expected}, got {got}")]
    OutOfOrder { expected: String, got: String },
    #[error("choice {0:?} does not match the trial's words")]
    ForeignChoice(String),
    #[error("a {task} trial needs a {expected} response")]
    WrongChoiceKind { task: Task, expected: &'static str },
    #[error("lists are for {lists}, session asked for {requested}")]
    TaskMismatch { lists: Task, requested: Task },
    #[error("session {session} has {answered} of {total} responses")]
    IncompleteSession {
        session: String,
        answered: usize,
        total: usize,
    },
    #[error("{0} responses have no adjudicated correctness")]
    Unadjudicated(usize),
    #[error("item {0} has no animacy annotation")]
    MissingAnimacy(String),
    #[error("response log line {line}: {reason}")]
    Log { line: usize, reason: String },
    #[error("adjudication file: {0}")]
    Adjudication(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
