//! Descriptive statistics for the forced-choice experiments, fixed-effects
//! logistic regression with likelihood-ratio tests, and redundancy
//! estimates.
//!
//! Random participant and item effects are not modelled. Regression
//! coefficients and chi-square values from a mixed-effects analysis are not
//! expected to match these fixed-effects fits.

mod logistic;
mod redundancy;
mod summary;

pub use logistic::{
    animacy_regression, likelihood_ratio_test, logistic_fit, AnimacyRegression, Design, LogisticFit,
    LrtResult, MAX_ABS_COEFFICIENT, MAX_IRLS_ITERATIONS,
};
pub use redundancy::{case_group_comparison, combined_redundancy, CaseComparison, CorpusAccuracy};
pub use summary::{
    animacy_table, bootstrap_participant_ci, describe, item_accuracies, item_summary, normal_ci,
    participant_accuracies, participant_summary, read_annotations, AnimacyCell, AnimacyCondition,
    Description, ItemSummary, ParticipantSummary, ResponseRecord,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no data")]
    NoData,
    #[error("responses without an animacy condition for items: {0:?}")]
    MissingCondition(Vec<String>),
    #[error("design matrix: {0}")]
    Design(String),
    #[error("perfect separation: coefficient {index} reached {value}")]
    SeparationDetected { index: usize, value: f64 },
    #[error("singular design matrix")]
    SingularDesign,
    #[error("log-likelihood decreased at iteration {iteration}: {before} -> {after}")]
    LikelihoodDecreased {
        iteration: usize,
        before: f64,
        after: f64,
    },
    #[error("reduced model predictors {reduced:?} are not a subset of {full:?}")]
    NotNested {
        full: Vec<String>,
        reduced: Vec<String>,
    },
    #[error("model did not converge")]
    NotConverged,
    #[error("degrees of freedom must be positive")]
    BadDegreesOfFreedom,
    #[error("{name} = {value} is outside [0, 1]")]
    Range { name: &'static str, value: f64 },
    #[error("no corpora in the {0} group")]
    EmptyGroup(&'static str),
    #[error("language {0} is listed both as case-marked and not")]
    InconsistentCase(String),
    #[error("annotation line {line}: {reason}")]
    Annotation { line: usize, reason: String },
}
