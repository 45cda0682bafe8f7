use chrono::{DateTime, Duration, SecondsFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Choice, ExperimentError, Item, Runner, Submission, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Always the true subject.
    Oracle,
    /// Uniformly random.
    Chance,
    /// The animate noun when exactly one is animate, otherwise random.
    Animacy,
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(Policy::Oracle),
            "chance" => Ok(Policy::Chance),
            "animacy" | "animacy-heuristic" => Ok(Policy::Animacy),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

/// The answer a simulated participant following `policy` gives for `item`.
pub fn simulated_choice<R: Rng>(policy: Policy, item: &Item, task: Task, rng: &mut R) -> Result<Choice, ExperimentError> {
    let pick_subject = match policy {
        Policy::Oracle => true,
        Policy::Chance => rng.gen(),
        Policy::Animacy => {
            let c = item
                .condition
                .ok_or_else(|| ExperimentError::MissingAnimacy(item.item_id.clone()))?;
            if c.subject_animate != c.object_animate {
                c.subject_animate
            } else {
                rng.gen()
            }
        }
    };
    let (first, second) = if pick_subject {
        (item.subject.clone(), item.object.clone())
    } else {
        (item.object.clone(), item.subject.clone())
    };
    Ok(match task {
        Task::ChooseSubject => Choice::Subject { word: first },
        Task::ConstructSentence => Choice::Sentence {
            left: first,
            right: second,
            typed: None,
        },
    })
}

/// Runs `n` complete synthetic sessions through `runner` and returns their
/// ids. Timestamps come from a fixed clock advanced by each latency, so a
/// rerun with the same seed writes the same log.
pub fn simulate_participants(
    runner: &mut Runner,
    policy: Policy,
    seed: u64,
    n: usize,
) -> Result<Vec<String>, ExperimentError> {
    if policy == Policy::Animacy {
        if let Some(item) = runner.lists().items.iter().find(|i| i.condition.is_none()) {
            return Err(ExperimentError::MissingAnimacy(item.item_id.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = DateTime::UNIX_EPOCH;
    let task = runner.task();
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let session_seed = rng.gen();
        let session = runner.start_session(task, Some(session_seed))?;
        let sid = session.session_id.clone();
        let trials = session.trial_order.len();
        for k in 0..trials {
            let t = runner.trial(&sid, k)?;
            let item = runner.lists().item(&t.item_id).expect("trial item exists");
            let choice = simulated_choice(policy, item, task, &mut rng)?;
            let latency_ms = rng.gen_range(400..4000);
            clock += Duration::milliseconds(latency_ms as i64);
            let submission = Submission {
                item_id: t.item_id,
                choice,
                latency_ms,
            };
            runner.record_response(&sid, submission, clock.to_rfc3339_opts(SecondsFormat::Millis, true))?;
        }
        ids.push(sid);
    }
    Ok(ids)
}
