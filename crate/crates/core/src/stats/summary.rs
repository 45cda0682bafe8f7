use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StatsError;

const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnimacyCondition {
    pub subject_animate: bool,
    pub object_animate: bool,
}

impl AnimacyCondition {
    pub const ALL: [AnimacyCondition; 4] = [
        AnimacyCondition::new(true, true),
        AnimacyCondition::new(true, false),
        AnimacyCondition::new(false, true),
        AnimacyCondition::new(false, false),
    ];

    pub const fn new(subject_animate: bool, object_animate: bool) -> Self {
        AnimacyCondition {
            subject_animate,
            object_animate,
        }
    }

    /// `AA`, `AI`, `IA` or `II` (subject letter first).
    pub fn label(&self) -> &'static str {
        match (self.subject_animate, self.object_animate) {
            (true, true) => "AA",
            (true, false) => "AI",
            (false, true) => "IA",
            (false, false) => "II",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub participant_id: String,
    pub item_id: String,
    pub correct: bool,
    pub is_catch: bool,
    #[serde(default)]
    pub condition: Option<AnimacyCondition>,
}

/// Mean and a normal-approximation 95% interval, `mean ± 1.96·sd/√n`, where
/// `sd` is the population standard deviation of `values`. With one value
/// the interval collapses to the mean.
pub fn normal_ci(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let half = Z_95 * var.sqrt() / n.sqrt();
    Some((mean, mean - half, mean + half))
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

pub fn describe(values: &[f64]) -> Result<Description, StatsError> {
    let (mean, ci_lower, ci_upper) = normal_ci(values).ok_or(StatsError::NoData)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Description {
        n: values.len(),
        mean,
        median: median(&sorted),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        ci_lower,
        ci_upper,
    })
}

fn accuracy_by<F>(responses: &[ResponseRecord], key: F) -> BTreeMap<String, f64>
where
    F: Fn(&ResponseRecord) -> &str,
{
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in responses.iter().filter(|r| !r.is_catch) {
        let c = counts.entry(key(r).to_string()).or_default();
        c.0 += r.correct as usize;
        c.1 += 1;
    }
    counts
        .into_iter()
        .map(|(k, (correct, total))| (k, correct as f64 / total as f64))
        .collect()
}

/// Fraction correct per participant over critical (non-catch) responses.
pub fn participant_accuracies(responses: &[ResponseRecord]) -> BTreeMap<String, f64> {
    accuracy_by(responses, |r| &r.participant_id)
}

/// Fraction correct per item over critical responses.
pub fn item_accuracies(responses: &[ResponseRecord]) -> BTreeMap<String, f64> {
    accuracy_by(responses, |r| &r.item_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSummary {
    pub participants: usize,
    /// Percent correct, averaged over participant means.
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Only one participant: the interval is not informative.
    pub degenerate: bool,
}

pub fn participant_summary(responses: &[ResponseRecord]) -> Result<ParticipantSummary, StatsError> {
    let accs: Vec<f64> = participant_accuracies(responses)
        .into_values()
        .map(|a| 100.0 * a)
        .collect();
    let (mean, lo, hi) = normal_ci(&accs).ok_or(StatsError::NoData)?;
    Ok(ParticipantSummary {
        participants: accs.len(),
        mean,
        ci_lower: lo,
        ci_upper: hi,
        degenerate: accs.len() < 2,
    })
}

/// Percentile interval of the mean participant accuracy (percent) from
/// `resamples` bootstrap draws of participants.
pub fn bootstrap_participant_ci(
    responses: &[ResponseRecord],
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64), StatsError> {
    let accs: Vec<f64> = participant_accuracies(responses).into_values().collect();
    if accs.is_empty() || resamples == 0 {
        return Err(StatsError::NoData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = accs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| accs[rng.gen_range(0..n)]).sum::<f64>() / n as f64 * 100.0)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok((at(0.025), at(0.975)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemSummary {
    pub items: usize,
    /// Item accuracies in percent.
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// Percent of items with accuracy strictly above 80% / 90%.
    pub pct_above_80: f64,
    pub pct_above_90: f64,
}

pub fn item_summary(responses: &[ResponseRecord]) -> Result<ItemSummary, StatsError> {
    let mut accs: Vec<f64> = item_accuracies(responses).into_values().collect();
    if accs.is_empty() {
        return Err(StatsError::NoData);
    }
    accs.sort_by(f64::total_cmp);
    let n = accs.len() as f64;
    let share = |threshold: f64| 100.0 * accs.iter().filter(|&&a| a > threshold).count() as f64 / n;
    Ok(ItemSummary {
        items: accs.len(),
        min: 100.0 * accs[0],
        max: 100.0 * accs[accs.len() - 1],
        median: 100.0 * median(&accs),
        pct_above_80: share(0.80),
        pct_above_90: share(0.90),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnimacyCell {
    pub condition: AnimacyCondition,
    pub items: usize,
    /// Mean of item accuracies, percent; `None` for an empty cell.
    pub accuracy: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

/// Accuracy per animacy condition, over item means. Always returns the four
/// cells in `AA, AI, IA, II` order.
pub fn animacy_table(responses: &[ResponseRecord]) -> Result<Vec<AnimacyCell>, StatsError> {
    let critical: Vec<&ResponseRecord> = responses.iter().filter(|r| !r.is_catch).collect();
    if critical.is_empty() {
        return Err(StatsError::NoData);
    }
    let mut missing: Vec<String> = critical
        .iter()
        .filter(|r| r.condition.is_none())
        .map(|r| r.item_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(StatsError::MissingCondition(missing));
    }
    let mut per_item: BTreeMap<&str, (AnimacyCondition, usize, usize)> = BTreeMap::new();
    for r in &critical {
        let cond = r.condition.expect("checked above");
        let e = per_item.entry(&r.item_id).or_insert((cond, 0, 0));
        e.1 += r.correct as usize;
        e.2 += 1;
    }
    Ok(AnimacyCondition::ALL
        .iter()
        .map(|&condition| {
            let accs: Vec<f64> = per_item
                .values()
                .filter(|(c, _, _)| *c == condition)
                .map(|&(_, k, n)| 100.0 * k as f64 / n as f64)
                .collect();
            let ci = normal_ci(&accs);
            AnimacyCell {
                condition,
                items: accs.len(),
                accuracy: ci.map(|c| c.0),
                ci_lower: ci.map(|c| c.1),
                ci_upper: ci.map(|c| c.2),
            }
        })
        .collect())
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "animate" | "a" => Some(true),
        "0" | "false" | "no" | "inanimate" | "i" => Some(false),
        _ => None,
    }
}

/// Reads `item_id<TAB>subject_animate<TAB>object_animate` rows. A header row
/// starting with `item_id` and `#` comments are skipped.
pub fn read_annotations(text: &str) -> Result<BTreeMap<String, AnimacyCondition>, StatsError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("item_id")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let err = |reason: String| StatsError::Annotation { line: i + 1, reason };
        if cols.len() != 3 {
            return Err(err(format!("expected 3 columns, found {}", cols.len())));
        }
        let s = parse_flag(cols[1]).ok_or_else(|| err(format!("bad flag {:?}", cols[1])))?;
        let o = parse_flag(cols[2]).ok_or_else(|| err(format!("bad flag {:?}", cols[2])))?;
        out.insert(cols[0].to_string(), AnimacyCondition::new(s, o));
    }
    Ok(out)
}
