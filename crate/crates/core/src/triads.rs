//! Subject-verb-object triad extraction.
//!
//! A triad is any `VERB` token with exactly one `nsubj` and exactly one `obj`
//! dependent. Each argument is represented by its head token only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{Sentence, Token, Treebank};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRecord {
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub token_id: usize,
}

impl WordRecord {
    pub fn surface(&self, surface: Surface) -> &str {
        match surface {
            Surface::Lemma => &self.lemma,
            Surface::Form => &self.form,
        }
    }
}

impl From<&Token> for WordRecord {
    fn from(t: &Token) -> Self {
        WordRecord {
            form: t.form.clone(),
            lemma: t.lemma.clone(),
            upos: t.upos.clone(),
            token_id: t.id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordOrder {
    SVO,
    SOV,
    OSV,
    OVS,
    VSO,
    VOS,
}

impl WordOrder {
    pub const ALL: [WordOrder; 6] = [
        WordOrder::SVO,
        WordOrder::SOV,
        WordOrder::OSV,
        WordOrder::OVS,
        WordOrder::VSO,
        WordOrder::VOS,
    ];

    /// Linear order of three distinct token positions.
    pub fn from_positions(subject: usize, verb: usize, object: usize) -> WordOrder {
        let mut roles = [(subject, 'S'), (verb, 'V'), (object, 'O')];
        roles.sort_unstable();
        match [roles[0].1, roles[1].1, roles[2].1] {
            ['S', 'V', 'O'] => WordOrder::SVO,
            ['S', 'O', 'V'] => WordOrder::SOV,
            ['O', 'S', 'V'] => WordOrder::OSV,
            ['O', 'V', 'S'] => WordOrder::OVS,
            ['V', 'S', 'O'] => WordOrder::VSO,
            _ => WordOrder::VOS,
        }
    }
}

impl fmt::Display for WordOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which string of a token is used downstream: lemmas for the human tasks,
/// word forms for vector lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    #[default]
    Lemma,
    Form,
}

impl FromStr for Surface {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lemma" => Ok(Surface::Lemma),
            "form" => Ok(Surface::Form),
            other => Err(format!("unknown surface {other:?} (expected lemma or form)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triad {
    pub corpus: String,
    pub sent_id: String,
    pub subject: WordRecord,
    pub verb: WordRecord,
    pub object: WordRecord,
    pub original_order: WordOrder,
    pub subject_is_pron: bool,
    pub object_is_pron: bool,
    /// Subject and object share the same surface string.
    #[serde(default)]
    pub same_arguments: bool,
}

impl Triad {
    /// Stable key: `corpus/sent_id/verb_token_id`.
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.corpus, self.sent_id, self.verb.token_id)
    }

    pub fn surface(&self, surface: Surface) -> [&str; 3] {
        [&self.subject, &self.verb, &self.object].map(|w| w.surface(surface))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionOptions {
    pub exclude_pronouns: bool,
    pub surface: Surface,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            exclude_pronouns: true,
            surface: Surface::Lemma,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub corpus: String,
    pub sentences: usize,
    pub rejected_sentences: usize,
    pub candidates: usize,
    pub pronoun_dropped: usize,
    pub excluded_by_list: usize,
    pub retained: usize,
    /// `retained / candidates`, or 0 for an empty treebank.
    pub retention: f64,
    pub same_arguments: usize,
}

impl ExtractionStats {
    /// Adds the counts of another split of the same corpus.
    pub fn merge(&mut self, other: &ExtractionStats) {
        self.sentences += other.sentences;
        self.rejected_sentences += other.rejected_sentences;
        self.candidates += other.candidates;
        self.pronoun_dropped += other.pronoun_dropped;
        self.excluded_by_list += other.excluded_by_list;
        self.retained += other.retained;
        self.same_arguments += other.same_arguments;
        self.retention = retention(self.retained, self.candidates);
    }
}

fn retention(kept: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        kept as f64 / total as f64
    }
}

fn single<'a>(sentence: &'a Sentence, head: usize, deprel: &str) -> Option<&'a Token> {
    let deps = sentence.dependents(head, deprel).ok()?;
    match deps.as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

/// All candidate triads of one sentence, before any filtering.
pub fn sentence_triads(corpus: &str, sentence: &Sentence, surface: Surface) -> Vec<Triad> {
    sentence
        .tokens
        .iter()
        .filter(|t| t.upos == "VERB")
        .filter_map(|verb| {
            let subject = single(sentence, verb.id, "nsubj")?;
            let object = single(sentence, verb.id, "obj")?;
            let mut triad = Triad {
                corpus: corpus.to_string(),
                sent_id: sentence.sent_id.clone(),
                subject: subject.into(),
                verb: verb.into(),
                object: object.into(),
                original_order: WordOrder::from_positions(subject.id, verb.id, object.id),
                subject_is_pron: subject.upos == "PRON",
                object_is_pron: object.upos == "PRON",
                same_arguments: false,
            };
            let [s, _, o] = triad.surface(surface);
            triad.same_arguments = s == o;
            Some(triad)
        })
        .collect()
}

pub fn extract_triads(treebank: &Treebank, opts: &ExtractionOptions) -> (Vec<Triad>, ExtractionStats) {
    extract_triads_excluding(treebank, opts, &ExclusionList::default())
}

/// Like [`extract_triads`], additionally dropping triads named in a
/// hand-maintained exclusion list.
pub fn extract_triads_excluding(
    treebank: &Treebank,
    opts: &ExtractionOptions,
    exclusions: &ExclusionList,
) -> (Vec<Triad>, ExtractionStats) {
    let mut stats = ExtractionStats {
        corpus: treebank.corpus_name.clone(),
        sentences: treebank.sentences.len(),
        rejected_sentences: treebank.rejected.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for sentence in &treebank.sentences {
        for triad in sentence_triads(&treebank.corpus_name, sentence, opts.surface) {
            stats.candidates += 1;
            if opts.exclude_pronouns && (triad.subject_is_pron || triad.object_is_pron) {
                stats.pronoun_dropped += 1;
                continue;
            }
            if exclusions.contains(&triad.key()) {
                stats.excluded_by_list += 1;
                continue;
            }
            if triad.same_arguments {
                stats.same_arguments += 1;
            }
            out.push(triad);
        }
    }
    stats.retained = out.len();
    stats.retention = retention(stats.retained, stats.candidates);
    (out, stats)
}

/// Corpora with at least `min_triads` triads, in input order.
pub fn filter_corpora<S: AsRef<str>>(census: &[(S, usize)], min_triads: usize) -> Vec<String> {
    census
        .iter()
        .filter(|(_, n)| *n >= min_triads)
        .map(|(c, _)| c.as_ref().to_string())
        .collect()
}

pub const MIN_TRIADS_PER_CORPUS: usize = 1600;

pub fn order_census(triads: &[Triad]) -> BTreeMap<WordOrder, usize> {
    let mut census: BTreeMap<WordOrder, usize> = WordOrder::ALL.iter().map(|&o| (o, 0)).collect();
    for t in triads {
        *census.entry(t.original_order).or_default() += 1;
    }
    census
}

/// Non-SVO triads, for manual mis-parse review.
pub fn review_listing(triads: &[Triad]) -> Vec<&Triad> {
    triads
        .iter()
        .filter(|t| t.original_order != WordOrder::SVO)
        .collect()
}

/// Triad keys (`corpus/sent_id/verb_id`) removed by hand, one per line.
/// Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList {
    keys: BTreeSet<String>,
}

impl ExclusionList {
    pub fn parse(text: &str) -> ExclusionList {
        let keys = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        ExclusionList { keys }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.contains(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum TriadFileError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_triads<W: Write>(mut w: W, triads: &[Triad]) -> io::Result<()> {
    for t in triads {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_triads<R: BufRead>(r: R) -> Result<Vec<Triad>, TriadFileError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| TriadFileError::Json { line: i + 1, source })?,
        );
    }
    Ok(out)
}
