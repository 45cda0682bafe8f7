use std::cmp::Ordering;

use rayon::prelude::*;

use super::{evaluate, train, ClassifierConfig, ClassifierError, Dataset, TrainedResult};

pub const GRID_LEARNING_RATES: [f64; 2] = [0.001, 0.0001];
pub const GRID_HIDDEN_SIZES: [usize; 3] = [32, 64, 128];

/// The 2 x 3 x 3 grid over learning rate and both hidden sizes, in canonical
/// order. Non-grid fields are copied from `base`.
pub fn default_grid(base: &ClassifierConfig) -> Vec<ClassifierConfig> {
    let mut grid = Vec::with_capacity(18);
    for &learning_rate in &GRID_LEARNING_RATES {
        for &hidden1 in &GRID_HIDDEN_SIZES {
            for &hidden2 in &GRID_HIDDEN_SIZES {
                grid.push(ClassifierConfig {
                    learning_rate,
                    hidden1,
                    hidden2,
                    ..base.clone()
                });
            }
        }
    }
    canonical_order(&mut grid);
    grid
}

/// Sorts by learning rate, then first and second hidden size, ascending.
pub fn canonical_order(grid: &mut [ClassifierConfig]) {
    grid.sort_by(|a, b| {
        a.learning_rate
            .partial_cmp(&b.learning_rate)
            .unwrap_or(Ordering::Equal)
            .then(a.hidden1.cmp(&b.hidden1))
            .then(a.hidden2.cmp(&b.hidden2))
    });
}

/// Index of the highest dev accuracy; the earliest index wins ties.
/// `None` entries (failed configs) are skipped.
pub fn select_best(dev_accuracies: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, acc) in dev_accuracies.iter().enumerate() {
        if let Some(acc) = *acc {
            match best {
                Some((_, b)) if acc <= b => {}
                _ => best = Some((i, acc)),
            }
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug)]
pub struct ConfigOutcome {
    pub config: ClassifierConfig,
    pub result: Result<TrainedResult, ClassifierError>,
}

#[derive(Debug)]
pub struct GridOutcome {
    /// One entry per config, in canonical order.
    pub outcomes: Vec<ConfigOutcome>,
    pub selected: usize,
}

impl GridOutcome {
    pub fn best(&self) -> &TrainedResult {
        self.outcomes[self.selected]
            .result
            .as_ref()
            .expect("selected config trained successfully")
    }

    pub fn dev_accuracies(&self) -> Vec<Option<f64>> {
        self.outcomes
            .iter()
            .map(|o| o.result.as_ref().ok().map(|r| r.dev_accuracy))
            .collect()
    }
}

/// Trains every config, picks the best by dev accuracy and, if a test set
/// is given, evaluates only the selected model on it. Configs are trained
/// in parallel; results are merged in canonical order.
pub fn grid_search(
    grid: &[ClassifierConfig],
    train_set: &Dataset,
    dev_set: &Dataset,
    test_set: Option<&Dataset>,
) -> Result<GridOutcome, ClassifierError> {
    if grid.is_empty() {
        return Err(ClassifierError::EmptyGrid);
    }
    let mut grid = grid.to_vec();
    canonical_order(&mut grid);

    let mut outcomes: Vec<ConfigOutcome> = grid
        .into_par_iter()
        .map(|config| {
            let result = train(&config, train_set, dev_set);
            if let Err(e) = &result {
                log::warn!("config {config:?} failed: {e}");
            }
            ConfigOutcome { config, result }
        })
        .collect();

    let accs: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| o.result.as_ref().ok().map(|r| r.dev_accuracy))
        .collect();
    let Some(selected) = select_best(&accs) else {
        let first = outcomes
            .iter()
            .find_map(|o| o.result.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(ClassifierError::AllConfigsFailed(first));
    };

    if let Some(test) = test_set {
        let best = outcomes[selected]
            .result
            .as_mut()
            .expect("selected config trained successfully");
        best.test_accuracy = Some(evaluate(&best.model, test)?.accuracy);
    }
    Ok(GridOutcome { outcomes, selected })
}
