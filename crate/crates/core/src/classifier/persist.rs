use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{ClassifierConfig, ClassifierError, Mlp, TrainedResult};

/// Shape header written before the flat weight array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub outputs: usize,
    /// Tensor order in the payload; matrices are row-major `out x in`.
    pub layout: Vec<String>,
}

/// One JSON header line, then every parameter as little-endian f64.
pub fn write_model<W: Write>(mut w: W, model: &Mlp) -> Result<(), ClassifierError> {
    let header = ModelHeader {
        input: model.input_dim(),
        hidden1: model.hidden1(),
        hidden2: model.hidden2(),
        outputs: 2,
        layout: ["w1", "b1", "w2", "b2", "w3", "b3"].map(String::from).to_vec(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| ClassifierError::ModelFile(e.to_string()))?;
    w.write_all(b"\n")?;
    for tensor in model.params() {
        for v in tensor {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: BufRead>(mut r: R) -> Result<Mlp, ClassifierError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h: ModelHeader =
        serde_json::from_str(&line).map_err(|e| ClassifierError::ModelFile(e.to_string()))?;
    if h.outputs != 2 {
        return Err(ClassifierError::ModelFile(format!("expected 2 outputs, got {}", h.outputs)));
    }
    let mut take = |n: usize| -> Result<Vec<f64>, ClassifierError> {
        let mut buf = vec![0u8; 8 * n];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    };
    let shape_err = |e: ndarray::ShapeError| ClassifierError::ModelFile(e.to_string());
    let w1 = Array2::from_shape_vec((h.hidden1, h.input), take(h.hidden1 * h.input)?).map_err(shape_err)?;
    let b1 = Array1::from(take(h.hidden1)?);
    let w2 = Array2::from_shape_vec((h.hidden2, h.hidden1), take(h.hidden2 * h.hidden1)?).map_err(shape_err)?;
    let b2 = Array1::from(take(h.hidden2)?);
    let w3 = Array2::from_shape_vec((2, h.hidden2), take(2 * h.hidden2)?).map_err(shape_err)?;
    let b3 = Array1::from(take(2)?);
    Ok(Mlp {
        w1,
        b1,
        w2,
        b2,
        w3,
        b3,
    })
}

/// One line of the per-config results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub corpus: String,
    pub config: ClassifierConfig,
    pub dev_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub epochs_run: Option<usize>,
    pub best_epoch: Option<usize>,
    pub selected: bool,
    pub error: Option<String>,
}

impl ResultSummary {
    pub fn from_result(corpus: &str, r: &TrainedResult, selected: bool) -> ResultSummary {
        ResultSummary {
            corpus: corpus.to_string(),
            config: r.config.clone(),
            dev_accuracy: Some(round4(r.dev_accuracy)),
            test_accuracy: r.test_accuracy.map(round4),
            epochs_run: Some(r.epochs_run),
            best_epoch: Some(r.best_epoch),
            selected,
            error: None,
        }
    }

    pub fn failed(corpus: &str, config: &ClassifierConfig, error: &ClassifierError) -> ResultSummary {
        ResultSummary {
            corpus: corpus.to_string(),
            config: config.clone(),
            dev_accuracy: None,
            test_accuracy: None,
            epochs_run: None,
            best_epoch: None,
            selected: false,
            error: Some(error.to_string()),
        }
    }
}

/// Accuracies are reported to four decimal places.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}
