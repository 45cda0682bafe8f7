//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls into the code it checks.

#![allow(dead_code)]

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svolab::classifier::{Dataset, Mlp};

/// Result of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientCheck {
    pub models: usize,
    pub entries: usize,
    /// Entries whose perturbation moved a ReLU input across zero; the
    /// finite difference is meaningless there.
    pub skipped_kinks: usize,
    pub max_relative_error: f64,
}

const FD_STEP: f64 = 1e-6;
/// Below this magnitude both gradients count as zero.
const ZERO_FLOOR: f64 = 1e-9;

fn pre_activations(m: &Mlp, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let z1 = x.dot(&m.w1.t()) + &m.b1;
    let a1 = z1.mapv(|v| v.max(0.0));
    let z2 = a1.dot(&m.w2.t()) + &m.b2;
    (z1, z2)
}

fn same_pattern(a: &(Array2<f64>, Array2<f64>), b: &(Array2<f64>, Array2<f64>)) -> bool {
    let signs = |z: &Array2<f64>| z.iter().map(|v| *v > 0.0).collect::<Vec<_>>();
    signs(&a.0) == signs(&b.0) && signs(&a.1) == signs(&b.1)
}

/// Relative error `|a - n| / max(|a|, |n|)`, zero when both are tiny.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ZERO_FLOOR {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Random models with hidden sizes up to `max_hidden` and inputs up to
/// `max_input` wide, each checked on a small random batch.
pub fn gradient_check(seed: u64, models: usize, max_input: usize, max_hidden: usize) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradientCheck {
        models,
        ..Default::default()
    };
    for _ in 0..models {
        let input = rng.gen_range(1..=max_input);
        let h1 = rng.gen_range(1..=max_hidden);
        let h2 = rng.gen_range(1..=max_hidden);
        let batch = rng.gen_range(1..=6);
        let mut model = Mlp::glorot(input, h1, h2, &mut rng);
        for p in model.params_mut() {
            for v in p.iter_mut() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
        let x = Array2::from_shape_fn((batch, input), |_| rng.gen_range(-2.0..2.0));
        let labels: Vec<bool> = (0..batch).map(|_| rng.gen()).collect();
        let (_, grads) = model.loss_and_gradients(x.view(), &labels).unwrap();
        let analytic: Vec<f64> = grads.params().iter().flat_map(|p| p.iter().copied()).collect();

        let base = pre_activations(&model, &x);
        let mut flat = 0;
        for block in 0..6 {
            let len = model.params()[block].len();
            for i in 0..len {
                let original = model.params()[block][i];
                model.params_mut()[block][i] = original + FD_STEP;
                let up = model.loss(x.view(), &labels).unwrap();
                let up_pattern = pre_activations(&model, &x);
                model.params_mut()[block][i] = original - FD_STEP;
                let down = model.loss(x.view(), &labels).unwrap();
                let down_pattern = pre_activations(&model, &x);
                model.params_mut()[block][i] = original;

                if !same_pattern(&base, &up_pattern) || !same_pattern(&base, &down_pattern) {
                    out.skipped_kinks += 1;
                } else {
                    let numeric = (up - down) / (2.0 * FD_STEP);
                    let err = relative_error(analytic[flat], numeric);
                    out.max_relative_error = out.max_relative_error.max(err);
                    out.entries += 1;
                }
                flat += 1;
            }
        }
    }
    out
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

fn log_lik(rows: &[Vec<f64>], y: &[bool], beta: &[f64]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(r, &yi)| {
            let eta: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
            let p = sigmoid(eta);
            if yi {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Damped Newton-Raphson for the logistic log-likelihood, from `start`,
/// halving the step until the likelihood does not drop.
pub fn newton_logistic(rows: &[Vec<f64>], y: &[bool], start: &[f64]) -> Vec<f64> {
    let p = start.len();
    let mut beta = start.to_vec();
    let mut ll = log_lik(rows, y, &beta);
    for _ in 0..200 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (r, &yi) in rows.iter().zip(y) {
            let eta: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let w = mu * (1.0 - mu);
            for j in 0..p {
                grad[j] += (yi as u8 as f64 - mu) * r[j];
                for k in 0..p {
                    hess[j][k] += w * r[j] * r[k];
                }
            }
        }
        let step = solve(hess, grad.clone());
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cand_ll = log_lik(rows, y, &cand);
            if cand_ll >= ll || t < 1e-10 {
                beta = cand;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-11 {
            break;
        }
    }
    beta
}

/// Rows `[1, x1, .., xk]` with standard normal covariates and labels drawn
/// from the logistic model with coefficients `beta`.
pub fn synthetic_logistic(n: usize, beta: &[f64], seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut r = vec![1.0];
        for _ in 1..beta.len() {
            r.push(standard_normal(&mut rng));
        }
        let eta: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
        labels.push(rng.gen::<f64>() < sigmoid(eta));
        rows.push(r);
    }
    (rows, labels)
}

/// Box-Muller standard normal.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Two isotropic unit-variance Gaussians in `dim` dimensions whose means
/// sit at `+shift` and `-shift` on every coordinate. Classes are balanced.
pub fn two_gaussians(n: usize, dim: usize, shift: f64, rng: &mut ChaCha8Rng) -> Dataset {
    let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let mut features = Array2::zeros((n, dim));
    for (i, &label) in labels.iter().enumerate() {
        let mean = if label { shift } else { -shift };
        for j in 0..dim {
            features[[i, j]] = mean + standard_normal(rng);
        }
    }
    Dataset::new(features, labels).unwrap()
}

/// The same features with the labels permuted.
pub fn shuffled_labels(data: &Dataset, rng: &mut ChaCha8Rng) -> Dataset {
    let mut labels = data.labels.clone();
    labels.shuffle(rng);
    Dataset::new(data.features.clone(), labels).unwrap()
}
