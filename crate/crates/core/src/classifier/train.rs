use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamState, ClassifierConfig, ClassifierError, Dataset, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedResult {
    pub config: ClassifierConfig,
    pub model: Mlp,
    pub dev_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub epochs_run: usize,
    /// Epoch (1-based) whose weights were kept.
    pub best_epoch: usize,
    /// Mean training loss of each epoch.
    pub train_loss: Vec<f64>,
    pub dev_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Examples where both outputs were exactly equal; these are predicted
    /// as first-is-subject.
    pub ties: usize,
}

pub fn evaluate(model: &Mlp, data: &Dataset) -> Result<Evaluation, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset("evaluation set"));
    }
    let probs = model.predict(data.features.view())?;
    let mut correct = 0;
    let mut ties = 0;
    for (p, &label) in probs.rows().into_iter().zip(&data.labels) {
        if p[0] == p[1] {
            ties += 1;
        }
        let predicted_subject_first = p[0] >= p[1];
        if predicted_subject_first == label {
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        correct,
        total: data.len(),
        ties,
    })
}

/// Mini-batch Adam training with dev-set early stopping. Returns the
/// snapshot with the best development accuracy (earliest on ties).
pub fn train(
    config: &ClassifierConfig,
    train_set: &Dataset,
    dev_set: &Dataset,
) -> Result<TrainedResult, ClassifierError> {
    if train_set.is_empty() {
        return Err(ClassifierError::EmptyDataset("training set"));
    }
    if dev_set.is_empty() {
        return Err(ClassifierError::EmptyDataset("development set"));
    }
    if train_set.dim() != dev_set.dim() {
        return Err(ClassifierError::Shape(format!(
            "training set has {} features, development set {}",
            train_set.dim(),
            dev_set.dim()
        )));
    }
    if config.max_epochs == 0 || config.batch_size == 0 {
        return Err(ClassifierError::Shape("max_epochs and batch_size must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Mlp::glorot(train_set.dim(), config.hidden1, config.hidden2, &mut rng);
    let mut adam = AdamState::for_model(&model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = (f64::NEG_INFINITY, 0, model.clone());
    let mut since_best = 0;
    let mut train_loss = Vec::new();
    let mut dev_history = Vec::new();
    let mut last_loss = f64::NAN;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let x: Array2<f64> = train_set.features.select(Axis(0), chunk);
            let labels: Vec<bool> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let (loss, grads) = model.loss_and_gradients(x.view(), &labels)?;
            if !loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    last_loss,
                });
            }
            last_loss = loss;
            epoch_loss += loss * chunk.len() as f64;
            adam_step(&mut adam, &mut model, &grads, config.learning_rate)?;
        }
        train_loss.push(epoch_loss / train_set.len() as f64);

        let dev = evaluate(&model, dev_set)?.accuracy;
        dev_history.push(dev);
        if dev > best.0 {
            best = (dev, epoch, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    let (dev_accuracy, best_epoch, model) = best;
    Ok(TrainedResult {
        config: config.clone(),
        model,
        dev_accuracy,
        test_accuracy: None,
        epochs_run: train_loss.len(),
        best_epoch,
        train_loss,
        dev_history,
    })
}
