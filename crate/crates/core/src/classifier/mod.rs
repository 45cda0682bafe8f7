//! Feedforward subjecthood classifiers.
//!
//! A triad vector `verb ++ first ++ second` goes through two ReLU layers and a
//! two-way softmax whose first output is the probability that the first noun
//! is the subject. Models are trained with Adam on mini-batches, selected by
//! development-set accuracy, and evaluated once on the test set.

mod adam;
mod grid;
mod mlp;
mod persist;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use grid::{canonical_order, default_grid, grid_search, select_best, ConfigOutcome, GridOutcome, GRID_HIDDEN_SIZES, GRID_LEARNING_RATES};
pub use mlp::Mlp;
pub use persist::{read_model, round4, write_model, ModelHeader, ResultSummary};
pub use train::{evaluate, train, Evaluation, TrainedResult};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::TriadExample;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (last finite loss {last_loss})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        last_loss: f64,
    },
    #[error("every configuration failed; first error: {0}")]
    AllConfigsFailed(String),
    #[error("empty grid")]
    EmptyGrid,
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub hidden1: usize,
    pub hidden2: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learning_rate: 0.001,
            hidden1: 64,
            hidden2: 64,
            max_epochs: 50,
            batch_size: 32,
            patience: 10,
            seed: 0,
        }
    }
}

/// Examples packed into a dense `n x features` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<bool>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<bool>) -> Result<Dataset, ClassifierError> {
        if features.nrows() != labels.len() {
            return Err(ClassifierError::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        Ok(Dataset { features, labels })
    }

    pub fn from_examples(examples: &[TriadExample]) -> Result<Dataset, ClassifierError> {
        let width = examples.first().map_or(0, |e| e.features.len());
        let mut flat = Vec::with_capacity(examples.len() * width);
        for e in examples {
            if e.features.len() != width {
                return Err(ClassifierError::Shape(format!(
                    "example {} has {} features, expected {width}",
                    e.triad_ref,
                    e.features.len()
                )));
            }
            flat.extend_from_slice(&e.features);
        }
        let features = Array2::from_shape_vec((examples.len(), width), flat)
            .map_err(|e| ClassifierError::Shape(e.to_string()))?;
        Dataset::new(features, examples.iter().map(|e| e.first_is_subject).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}
