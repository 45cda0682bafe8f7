//! Measuring how redundant word order and case are with lexical semantics
//! in transitive clauses.
//!
//! The crate covers the whole pipeline: CoNLL-U ingestion ([`conllu`]),
//! subject-verb-object triad extraction ([`triads`]), word-vector loading and
//! triad featurization ([`embeddings`]), feedforward subjecthood classifiers
//! with grid search ([`classifier`]), descriptive and regression statistics
//! ([`stats`]) and the forced-choice experiment runner ([`experiment`]).

pub mod classifier;
pub mod conllu;
pub mod embeddings;
pub mod experiment;
pub mod stats;
pub mod triads;
