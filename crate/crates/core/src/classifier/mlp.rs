use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use super::ClassifierError;

/// Two hidden ReLU layers and a two-way softmax output.
///
/// Weight matrices are stored `out x in`. The same struct holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

struct Activations {
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
    logits: Array2<f64>,
}

/// NaN passes through so that divergence surfaces as a non-finite loss.
fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| if v < 0.0 { 0.0 } else { v })
}

/// Row-wise softmax over two logits, computed from the log-sum-exp.
fn softmax_pair(l0: f64, l1: f64) -> [f64; 2] {
    let m = l0.max(l1);
    let e0 = (l0 - m).exp();
    let e1 = (l1 - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn log_softmax_pair(l0: f64, l1: f64) -> [f64; 2] {
    let m = l0.max(l1);
    let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
    [l0 - lse, l1 - lse]
}

fn label_index(first_is_subject: bool) -> usize {
    if first_is_subject {
        0
    } else {
        1
    }
}

impl Mlp {
    pub fn zeros(input: usize, hidden1: usize, hidden2: usize) -> Mlp {
        Mlp {
            w1: Array2::zeros((hidden1, input)),
            b1: Array1::zeros(hidden1),
            w2: Array2::zeros((hidden2, hidden1)),
            b2: Array1::zeros(hidden2),
            w3: Array2::zeros((2, hidden2)),
            b3: Array1::zeros(2),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(input: usize, hidden1: usize, hidden2: usize, rng: &mut R) -> Mlp {
        let mut layer = |fan_out: usize, fan_in: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-limit..limit))
        };
        let w1 = layer(hidden1, input);
        let w2 = layer(hidden2, hidden1);
        let w3 = layer(2, hidden2);
        Mlp {
            w1,
            b1: Array1::zeros(hidden1),
            w2,
            b2: Array1::zeros(hidden2),
            w3,
            b3: Array1::zeros(2),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden1(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden2(&self) -> usize {
        self.w2.nrows()
    }

    /// All parameters in the fixed order `w1 b1 w2 b2 w3 b3`.
    pub fn params(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.w3.as_slice_mut().expect("standard layout"),
            self.b3.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.w1.dim() == other.w1.dim()
            && self.w2.dim() == other.w2.dim()
            && self.w3.dim() == other.w3.dim()
            && self.b1.len() == other.b1.len()
            && self.b2.len() == other.b2.len()
            && self.b3.len() == other.b3.len()
    }

    fn check_input(&self, width: usize) -> Result<(), ClassifierError> {
        if width != self.input_dim() {
            return Err(ClassifierError::Shape(format!(
                "input has {width} features, model expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn activations(&self, x: ArrayView2<f64>) -> Activations {
        let z1 = x.dot(&self.w1.t()) + &self.b1;
        let a1 = relu(&z1);
        let z2 = a1.dot(&self.w2.t()) + &self.b2;
        let a2 = relu(&z2);
        let logits = a2.dot(&self.w3.t()) + &self.b3;
        Activations {
            z1,
            a1,
            z2,
            a2,
            logits,
        }
    }

    /// `(p_first_is_subject, p_first_is_object)` for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<[f64; 2], ClassifierError> {
        self.check_input(features.len())?;
        let x = ArrayView1::from(features).insert_axis(Axis(0));
        let l = self.activations(x).logits;
        Ok(softmax_pair(l[[0, 0]], l[[0, 1]]))
    }

    /// Probabilities for every row of `x`, as an `n x 2` matrix.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, ClassifierError> {
        self.check_input(x.ncols())?;
        let logits = self.activations(x).logits;
        let mut out = Array2::zeros(logits.dim());
        Zip::from(out.rows_mut())
            .and(logits.rows())
            .for_each(|mut o, l| {
                let p = softmax_pair(l[0], l[1]);
                o[0] = p[0];
                o[1] = p[1];
            });
        Ok(out)
    }

    /// Mean cross-entropy of the batch and its exact gradient with respect
    /// to every parameter.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        labels: &[bool],
    ) -> Result<(f64, Mlp), ClassifierError> {
        let n = labels.len();
        if n == 0 {
            return Err(ClassifierError::EmptyBatch);
        }
        if x.nrows() != n {
            return Err(ClassifierError::Shape(format!(
                "{} rows but {n} labels",
                x.nrows()
            )));
        }
        self.check_input(x.ncols())?;
        let act = self.activations(x);

        let mut loss = 0.0;
        // d loss / d logits = (softmax - onehot) / n
        let mut d3 = Array2::<f64>::zeros((n, 2));
        for (i, &label) in labels.iter().enumerate() {
            let (l0, l1) = (act.logits[[i, 0]], act.logits[[i, 1]]);
            let k = label_index(label);
            loss -= log_softmax_pair(l0, l1)[k];
            let p = softmax_pair(l0, l1);
            d3[[i, 0]] = p[0];
            d3[[i, 1]] = p[1];
            d3[[i, k]] -= 1.0;
        }
        let scale = 1.0 / n as f64;
        loss *= scale;
        d3 *= scale;

        let gw3 = d3.t().dot(&act.a2);
        let gb3 = d3.sum_axis(Axis(0));
        let mut d2 = d3.dot(&self.w3);
        Zip::from(&mut d2).and(&act.z2).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let gw2 = d2.t().dot(&act.a1);
        let gb2 = d2.sum_axis(Axis(0));
        let mut d1 = d2.dot(&self.w2);
        Zip::from(&mut d1).and(&act.z1).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let gw1 = d1.t().dot(&x);
        let gb1 = d1.sum_axis(Axis(0));

        let grads = Mlp {
            w1: gw1.as_standard_layout().into_owned(),
            b1: gb1,
            w2: gw2.as_standard_layout().into_owned(),
            b2: gb2,
            w3: gw3.as_standard_layout().into_owned(),
            b3: gb3,
        };
        Ok((loss, grads))
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, x: ArrayView2<f64>, labels: &[bool]) -> Result<f64, ClassifierError> {
        if labels.is_empty() {
            return Err(ClassifierError::EmptyBatch);
        }
        self.check_input(x.ncols())?;
        let logits = self.activations(x).logits;
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| -log_softmax_pair(logits[[i, 0]], logits[[i, 1]])[label_index(label)])
            .sum();
        Ok(total / labels.len() as f64)
    }
}
