use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Adjudications, Choice, ExperimentError, Runner, Session, SessionStatus, Task};
use crate::stats::{
    animacy_table, item_summary, participant_summary, AnimacyCell, ItemSummary, ParticipantSummary,
    ResponseRecord,
};

/// Minimum number of correct catch trials for a participant to be kept.
pub const CATCH_THRESHOLD: usize = 15;

/// How correctness is decided. Choose-subject trials always use `Choice`;
/// construct-sentence trials use `Order` (subject in the left slot) or
/// `Morphology` (coder decisions imported from an adjudication file).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    Choice,
    Order,
    Morphology,
}

#[derive(Debug, Clone)]
pub struct ScoringOptions<'a> {
    pub catch_threshold: usize,
    /// Construct-sentence mode; ignored for choose-subject sessions.
    pub construct_mode: ScoringMode,
    pub adjudications: Option<&'a Adjudications>,
    /// Score unfinished sessions on the responses they have.
    pub allow_partial: bool,
}

impl Default for ScoringOptions<'_> {
    fn default() -> Self {
        ScoringOptions {
            catch_threshold: CATCH_THRESHOLD,
            construct_mode: ScoringMode::Order,
            adjudications: None,
            allow_partial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub item_id: String,
    pub is_catch: bool,
    /// `None` for a trial that has no response yet.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub session_id: String,
    pub list_id: usize,
    pub task: Task,
    pub mode: ScoringMode,
    pub complete: bool,
    pub catch_correct: usize,
    pub catch_total: usize,
    pub included: bool,
    pub critical_correct: usize,
    pub critical_total: usize,
    /// `None` when no critical trial has been answered.
    pub critical_accuracy: Option<f64>,
    pub items: Vec<ItemOutcome>,
}

fn mode_for(task: Task, opts: &ScoringOptions) -> ScoringMode {
    match task {
        Task::ChooseSubject => ScoringMode::Choice,
        Task::ConstructSentence => opts.construct_mode,
    }
}

/// Correctness of every answered trial, in trial order.
fn outcomes(runner: &Runner, session: &Session, opts: &ScoringOptions) -> Result<Vec<ItemOutcome>, ExperimentError> {
    let list = &runner.lists().lists[session.list_id];
    let catch: BTreeSet<&str> = list.catch_items.iter().map(String::as_str).collect();
    let mode = mode_for(session.task, opts);
    let mut missing = 0;
    let mut out = Vec::with_capacity(session.trial_order.len());
    for item_id in &session.trial_order {
        let item = runner
            .lists()
            .item(item_id)
            .ok_or_else(|| ExperimentError::UnknownItem(item_id.clone()))?;
        let correct = match session.response(item_id) {
            None => None,
            Some(r) => match (mode, &r.choice) {
                (ScoringMode::Morphology, _) => {
                    let decided = opts
                        .adjudications
                        .and_then(|a| a.get(&(session.session_id.clone(), item_id.clone())))
                        .copied();
                    if decided.is_none() {
                        missing += 1;
                    }
                    decided
                }
                (_, Choice::Subject { word }) => Some(*word == item.subject),
                (_, Choice::Sentence { left, .. }) => Some(*left == item.subject),
            },
        };
        out.push(ItemOutcome {
            item_id: item_id.clone(),
            is_catch: catch.contains(item_id.as_str()),
            correct,
        });
    }
    if missing > 0 {
        return Err(ExperimentError::Unadjudicated(missing));
    }
    Ok(out)
}

pub fn score_session(runner: &Runner, session_id: &str, opts: &ScoringOptions) -> Result<SessionScore, ExperimentError> {
    let session = runner.session(session_id)?;
    let complete = session.status() == SessionStatus::Complete;
    if !complete && !opts.allow_partial {
        return Err(ExperimentError::IncompleteSession {
            session: session_id.to_string(),
            answered: session.responses.len(),
            total: session.trial_order.len(),
        });
    }
    let items = outcomes(runner, session, opts)?;
    let count = |catch: bool, want_correct: bool| {
        items
            .iter()
            .filter(|o| o.is_catch == catch && o.correct.is_some() && (!want_correct || o.correct == Some(true)))
            .count()
    };
    let catch_correct = count(true, true);
    let critical_correct = count(false, true);
    let critical_total = count(false, false);
    Ok(SessionScore {
        session_id: session.session_id.clone(),
        list_id: session.list_id,
        task: session.task,
        mode: mode_for(session.task, opts),
        complete,
        catch_correct,
        catch_total: items.iter().filter(|o| o.is_catch).count(),
        included: catch_correct >= opts.catch_threshold,
        critical_correct,
        critical_total,
        critical_accuracy: (critical_total > 0).then(|| critical_correct as f64 / critical_total as f64),
        items,
    })
}

/// One record per answered trial of every session (catch trials flagged),
/// with animacy conditions taken from the item catalogue.
pub fn response_records(runner: &Runner, opts: &ScoringOptions) -> Result<Vec<ResponseRecord>, ExperimentError> {
    let mut out = Vec::new();
    for session in runner.sessions() {
        for o in outcomes(runner, session, opts)? {
            if let Some(correct) = o.correct {
                out.push(ResponseRecord {
                    participant_id: session.session_id.clone(),
                    condition: runner.lists().item(&o.item_id).and_then(|i| i.condition),
                    item_id: o.item_id,
                    correct,
                    is_catch: o.is_catch,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub task: Task,
    pub mode: ScoringMode,
    pub catch_threshold: usize,
    pub sessions: usize,
    pub complete_sessions: usize,
    pub included_sessions: usize,
    /// Over complete, included sessions only.
    pub participants: Option<ParticipantSummary>,
    pub items: Option<ItemSummary>,
    /// Present when every critical item has an animacy annotation.
    pub animacy: Option<Vec<AnimacyCell>>,
    pub scores: Vec<SessionScore>,
}

pub fn experiment_report(runner: &Runner, opts: &ScoringOptions) -> Result<ExperimentReport, ExperimentError> {
    let complete_opts = ScoringOptions {
        allow_partial: true,
        ..opts.clone()
    };
    let mut scores = Vec::new();
    for s in runner.sessions() {
        scores.push(score_session(runner, &s.session_id, &complete_opts)?);
    }
    let kept: BTreeSet<&str> = scores
        .iter()
        .filter(|s| s.complete && s.included)
        .map(|s| s.session_id.as_str())
        .collect();
    let records: Vec<ResponseRecord> = response_records(runner, &complete_opts)?
        .into_iter()
        .filter(|r| !r.is_catch && kept.contains(r.participant_id.as_str()))
        .collect();
    Ok(ExperimentReport {
        task: runner.task(),
        mode: mode_for(runner.task(), opts),
        catch_threshold: opts.catch_threshold,
        sessions: scores.len(),
        complete_sessions: scores.iter().filter(|s| s.complete).count(),
        included_sessions: kept.len(),
        participants: participant_summary(&records).ok(),
        items: item_summary(&records).ok(),
        animacy: animacy_table(&records).ok(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::lists::toy_items;
    use crate::experiment::{build_lists, ListOptions, RunnerOptions, Submission};
    use crate::stats::participant_accuracies;

    fn runner(task: Task) -> Runner {
        let opts = ListOptions {
            n_lists: 1,
            task,
            ..Default::default()
        };
        let lf = build_lists(&toy_items("c", 10), &toy_items("k", 20), &opts).unwrap();
        Runner::new(lf, RunnerOptions::default()).unwrap()
    }

    /// Answers every trial; catch items correct only while fewer than
    /// `catch_right` have been answered correctly.
    fn run(r: &mut Runner, catch_right: usize, critical_right: impl Fn(usize) -> bool) -> String {
        let task = r.task();
        let sid = r.start_session(task, Some(1)).unwrap().session_id.clone();
        let catch: BTreeSet<String> = r.lists().lists[0].catch_items.iter().cloned().collect();
        let (mut c, mut k) = (0, 0);
        for i in 0..30 {
            let t = r.trial(&sid, i).unwrap();
            let item = r.lists().item(&t.item_id).unwrap().clone();
            let right = if catch.contains(&t.item_id) {
                c += 1;
                c <= catch_right
            } else {
                k += 1;
                critical_right(k - 1)
            };
            let (first, second) = if right {
                (item.subject, item.object)
            } else {
                (item.object, item.subject)
            };
            let choice = match task {
                Task::ChooseSubject => Choice::Subject { word: first },
                Task::ConstructSentence => Choice::Sentence {
                    left: first,
                    right: second,
                    typed: None,
                },
            };
            r.record_response(
                &sid,
                Submission {
                    item_id: t.item_id,
                    choice,
                    latency_ms: 1,
                },
                "t".into(),
            )
            .unwrap();
        }
        sid
    }

    #[test]
    fn catch_boundary() {
        let mut r = runner(Task::ChooseSubject);
        let a = run(&mut r, 15, |_| true);
        let b = run(&mut r, 14, |_| true);
        let sa = score_session(&r, &a, &ScoringOptions::default()).unwrap();
        let sb = score_session(&r, &b, &ScoringOptions::default()).unwrap();
        assert_eq!((sa.catch_correct, sa.included), (15, true));
        assert_eq!((sb.catch_correct, sb.included), (14, false));
        let lenient = ScoringOptions {
            catch_threshold: 14,
            ..Default::default()
        };
        assert!(score_session(&r, &b, &lenient).unwrap().included);
    }

    #[test]
    fn accuracy_matches_offline_stats() {
        let mut r = runner(Task::ChooseSubject);
        let sid = run(&mut r, 20, |k| k % 3 != 0);
        let s = score_session(&r, &sid, &ScoringOptions::default()).unwrap();
        assert_eq!((s.critical_correct, s.critical_total), (6, 10));
        let records: Vec<ResponseRecord> = response_records(&r, &ScoringOptions::default())
            .unwrap()
            .into_iter()
            .filter(|r| !r.is_catch)
            .collect();
        let offline = participant_accuracies(&records)[&sid];
        assert_eq!(offline.to_bits(), s.critical_accuracy.unwrap().to_bits());
    }

    #[test]
    fn order_scored_construct() {
        let mut r = runner(Task::ConstructSentence);
        let sid = run(&mut r, 20, |k| k < 5);
        let s = score_session(&r, &sid, &ScoringOptions::default()).unwrap();
        assert_eq!(s.mode, ScoringMode::Order);
        assert_eq!(s.critical_accuracy, Some(0.5));
        let morph = ScoringOptions {
            construct_mode: ScoringMode::Morphology,
            ..Default::default()
        };
        assert!(matches!(score_session(&r, &sid, &morph), Err(ExperimentError::Unadjudicated(30))));
    }

    #[test]
    fn incomplete_sessions() {
        let mut r = runner(Task::ChooseSubject);
        let sid = r.start_session(Task::ChooseSubject, None).unwrap().session_id.clone();
        assert!(matches!(
            score_session(&r, &sid, &ScoringOptions::default()),
            Err(ExperimentError::IncompleteSession { answered: 0, total: 30, .. })
        ));
        let partial = ScoringOptions {
            allow_partial: true,
            ..Default::default()
        };
        let s = score_session(&r, &sid, &partial).unwrap();
        assert_eq!(s.critical_accuracy, None);
        assert!(!s.included);
    }

    #[test]
    fn report_counts_included_only() {
        let mut r = runner(Task::ChooseSubject);
        run(&mut r, 20, |_| true);
        run(&mut r, 3, |_| false);
        let rep = experiment_report(&r, &ScoringOptions::default()).unwrap();
        assert_eq!((rep.sessions, rep.complete_sessions, rep.included_sessions), (2, 2, 1));
        assert_eq!(rep.participants.unwrap().mean, 100.0);
        assert!(rep.animacy.is_none());
    }
}
