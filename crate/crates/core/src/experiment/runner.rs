use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, Item, ListsFile, Task};

/// A participant's answer. `Subject` for choose-subject trials; `Sentence`
/// for construct-sentence trials, with the word placed left and right of
/// the verb and an optional free-text sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Choice {
    Subject {
        word: String,
    },
    Sentence {
        left: String,
        right: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        typed: Option<String>,
    },
}

/// Body of a response submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub item_id: String,
    pub choice: Choice,
    #[serde(default)]
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResponse {
    pub item_id: String,
    pub choice: Choice,
    pub latency_ms: u64,
    pub timestamp: String,
}

/// What a participant sees for one trial. Words are base forms in display
/// order; nothing about the original sentence is included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPayload {
    pub item_id: String,
    pub verb: String,
    pub words: [String; 2],
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub list_id: usize,
    pub task: Task,
    pub seed: u64,
    pub trial_order: Vec<String>,
    /// Per trial: whether the subject is displayed first.
    pub subject_first: Vec<bool>,
    pub single_page: bool,
    #[serde(default)]
    pub responses: Vec<TrialResponse>,
}

impl Session {
    pub fn status(&self) -> SessionStatus {
        if self.responses.len() == self.trial_order.len() {
            SessionStatus::Complete
        } else {
            SessionStatus::Active
        }
    }

    pub fn response(&self, item_id: &str) -> Option<&TrialResponse> {
        self.responses.iter().find(|r| r.item_id == item_id)
    }

    /// Index of the first trial without a response.
    pub fn next_trial(&self) -> Option<usize> {
        self.trial_order.iter().position(|id| self.response(id).is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    SessionStarted { session: Session },
    Response { session_id: String, response: TrialResponse },
}

/// Append-only JSON Lines file. Every event is flushed and synced before
/// `append` returns.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Opens (creating if needed) and returns the events already stored. A
    /// final line without a newline is a torn write and is dropped.
    pub fn open(path: &Path) -> Result<(EventLog, Vec<LogEvent>), ExperimentError> {
        let mut events = Vec::new();
        if path.exists() {
            let raw = std::fs::read(path)?;
            let torn = !raw.is_empty() && !raw.ends_with(b"\n");
            let lines: Vec<&[u8]> = raw.split(|&b| b == b'\n').collect();
            let n = lines.len();
            for (i, line) in lines.into_iter().enumerate() {
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                match serde_json::from_slice::<LogEvent>(line) {
                    Ok(e) => events.push(e),
                    Err(_) if torn && i + 1 == n => {
                        log::warn!("{}: dropping incomplete final line", path.display());
                    }
                    Err(e) => {
                        return Err(ExperimentError::Log {
                            line: i + 1,
                            reason: e.to_string(),
                        })
                    }
                }
            }
            if torn {
                // rewrite without the torn tail so later appends start on a fresh line
                let keep = raw.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
                let f = OpenOptions::new().write(true).open(path)?;
                f.set_len(keep as u64)?;
                f.sync_all()?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((
            EventLog {
                path: path.to_path_buf(),
                file,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &LogEvent) -> Result<(), ExperimentError> {
        let mut line = serde_json::to_vec(event).map_err(|e| ExperimentError::Log {
            line: 0,
            reason: e.to_string(),
        })?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunnerOptions {
    /// All trials on one page: responses may arrive in any order.
    pub single_page: bool,
    /// Base seed for sessions started without an explicit seed.
    pub seed: u64,
}

/// Sessions over a fixed set of lists. New participants are assigned to
/// lists round-robin.
#[derive(Debug)]
pub struct Runner {
    lists: ListsFile,
    opts: RunnerOptions,
    sessions: BTreeMap<String, Session>,
    log: Option<EventLog>,
}

impl Runner {
    /// In-memory runner, nothing persisted.
    pub fn new(lists: ListsFile, opts: RunnerOptions) -> Result<Runner, ExperimentError> {
        lists.validate()?;
        if lists.lists.is_empty() {
            return Err(ExperimentError::NoItems);
        }
        Ok(Runner {
            lists,
            opts,
            sessions: BTreeMap::new(),
            log: None,
        })
    }

    /// Runner backed by a response log; existing events are replayed.
    pub fn with_log(lists: ListsFile, opts: RunnerOptions, path: &Path) -> Result<Runner, ExperimentError> {
        let mut runner = Runner::new(lists, opts)?;
        let (log, events) = EventLog::open(path)?;
        for (i, event) in events.into_iter().enumerate() {
            let bad = |e: ExperimentError| ExperimentError::Log {
                line: i + 1,
                reason: e.to_string(),
            };
            match event {
                LogEvent::SessionStarted { session } => {
                    if session.list_id >= runner.lists.lists.len() {
                        return Err(bad(ExperimentError::UnknownList(session.list_id)));
                    }
                    runner.sessions.insert(session.session_id.clone(), session);
                }
                LogEvent::Response { session_id, response } => {
                    runner.check_response(&session_id, &response.item_id, &response.choice).map_err(bad)?;
                    let s = runner.sessions.get_mut(&session_id).expect("checked");
                    s.responses.push(response);
                }
            }
        }
        runner.log = Some(log);
        Ok(runner)
    }

    pub fn lists(&self) -> &ListsFile {
        &self.lists
    }

    pub fn task(&self) -> Task {
        self.lists.task
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn session(&self, id: &str) -> Result<&Session, ExperimentError> {
        self.sessions
            .get(id)
            .ok_or_else(|| ExperimentError::UnknownSession(id.to_string()))
    }

    fn item(&self, id: &str) -> Result<&Item, ExperimentError> {
        self.lists
            .item(id)
            .ok_or_else(|| ExperimentError::UnknownItem(id.to_string()))
    }

    /// Starts a session on the next list in round-robin order.
    pub fn start_session(&mut self, task: Task, seed: Option<u64>) -> Result<&Session, ExperimentError> {
        if task != self.lists.task {
            return Err(ExperimentError::TaskMismatch {
                lists: self.lists.task,
                requested: task,
            });
        }
        let list_id = self.sessions.len() % self.lists.lists.len();
        let seed = seed.unwrap_or_else(|| self.opts.seed.wrapping_add(self.sessions.len() as u64));
        self.start_session_on_list(list_id, seed)
    }

    /// Trial order is a seeded shuffle of the list's critical and catch
    /// items; each trial then gets a fair coin for which noun is shown first.
    pub fn start_session_on_list(&mut self, list_id: usize, seed: u64) -> Result<&Session, ExperimentError> {
        let list = self
            .lists
            .lists
            .get(list_id)
            .ok_or(ExperimentError::UnknownList(list_id))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trial_order: Vec<String> =
            list.critical_items.iter().chain(&list.catch_items).cloned().collect();
        trial_order.shuffle(&mut rng);
        let subject_first = trial_order.iter().map(|_| rng.gen::<bool>()).collect();
        let session = Session {
            session_id: format!("s{:06}", self.sessions.len() + 1),
            list_id,
            task: list.task,
            seed,
            trial_order,
            subject_first,
            single_page: self.opts.single_page,
            responses: Vec::new(),
        };
        if let Some(log) = &mut self.log {
            log.append(&LogEvent::SessionStarted {
                session: session.clone(),
            })?;
        }
        let id = session.session_id.clone();
        Ok(self.sessions.entry(id).or_insert(session))
    }

    /// Trial `k` (0-based) of a session.
    pub fn trial(&self, session_id: &str, k: usize) -> Result<TrialPayload, ExperimentError> {
        let s = self.session(session_id)?;
        let item_id = s.trial_order.get(k).ok_or_else(|| ExperimentError::UnknownTrial {
            session: session_id.to_string(),
            index: k,
        })?;
        let item = self.item(item_id)?;
        let words = if s.subject_first[k] {
            [item.subject.clone(), item.object.clone()]
        } else {
            [item.object.clone(), item.subject.clone()]
        };
        Ok(TrialPayload {
            item_id: item_id.clone(),
            verb: item.verb.clone(),
            words,
            task: s.task,
        })
    }

    fn check_response(&self, session_id: &str, item_id: &str, choice: &Choice) -> Result<(), ExperimentError> {
        let s = self.session(session_id)?;
        if !s.trial_order.iter().any(|id| id == item_id) {
            return Err(ExperimentError::ItemNotInSession {
                session: session_id.to_string(),
                item: item_id.to_string(),
            });
        }
        if s.response(item_id).is_some() {
            return Err(ExperimentError::DuplicateResponse {
                session: session_id.to_string(),
                item: item_id.to_string(),
            });
        }
        if !s.single_page {
            let expected = &s.trial_order[s.next_trial().expect("an unanswered trial exists")];
            if expected != item_id {
                return Err(ExperimentError::OutOfOrder {
                    expected: expected.clone(),
                    got: item_id.to_string(),
                });
            }
        }
        let item = self.item(item_id)?;
        let words = [item.subject.as_str(), item.object.as_str()];
        match (s.task, choice) {
            (Task::ChooseSubject, Choice::Subject { word }) => {
                if !words.contains(&word.as_str()) {
                    return Err(ExperimentError::ForeignChoice(word.clone()));
                }
            }
            (Task::ConstructSentence, Choice::Sentence { left, right, .. }) => {
                let placed = [left.as_str(), right.as_str()];
                let ok = placed == words || placed == [words[1], words[0]];
                if !ok {
                    return Err(ExperimentError::ForeignChoice(format!("{left} / {right}")));
                }
            }
            (Task::ChooseSubject, _) => {
                return Err(ExperimentError::WrongChoiceKind {
                    task: s.task,
                    expected: "word",
                })
            }
            (Task::ConstructSentence, _) => {
                return Err(ExperimentError::WrongChoiceKind {
                    task: s.task,
                    expected: "left/right",
                })
            }
        }
        Ok(())
    }

    /// Validates, appends to the log, then stores. Returns the number of
    /// responses the session now has.
    pub fn record_response(
        &mut self,
        session_id: &str,
        submission: Submission,
        timestamp: String,
    ) -> Result<usize, ExperimentError> {
        self.check_response(session_id, &submission.item_id, &submission.choice)?;
        let response = TrialResponse {
            item_id: submission.item_id,
            choice: submission.choice,
            latency_ms: submission.latency_ms,
            timestamp,
        };
        if let Some(log) = &mut self.log {
            log.append(&LogEvent::Response {
                session_id: session_id.to_string(),
                response: response.clone(),
            })?;
        }
        let s = self.sessions.get_mut(session_id).expect("checked");
        s.responses.push(response);
        Ok(s.responses.len())
    }
}
