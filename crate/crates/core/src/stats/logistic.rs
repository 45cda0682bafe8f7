use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{ResponseRecord, StatsError};

pub const MAX_IRLS_ITERATIONS: usize = 100;
pub const COEFFICIENT_TOLERANCE: f64 = 1e-8;
/// A coefficient this large means the classes are (quasi-)separated.
pub const MAX_ABS_COEFFICIENT: f64 = 30.0;

/// Named design matrix; the first column must be the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

impl Design {
    pub fn new(names: &[&str], rows: &[Vec<f64>]) -> Result<Design, StatsError> {
        let p = names.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(StatsError::Design(format!("every row needs {p} values")));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Ok(Design {
            names: names.iter().map(|s| s.to_string()).collect(),
            x,
        })
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Design, StatsError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| StatsError::Design(format!("no column {n:?}")))
            })
            .collect::<Result<_, _>>()?;
        let x = DMatrix::from_fn(self.x.nrows(), idx.len(), |i, j| self.x[(i, idx[j])]);
        Ok(Design {
            names: names.iter().map(|s| s.to_string()).collect(),
            x,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub predictors: Vec<String>,
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood at the start and after every iteration.
    pub log_likelihood_path: Vec<f64>,
    pub gradient_norm: f64,
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y).map(|(&e, &yi)| yi * e - softplus(e)).sum()
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares, starting from zero. Stops when the largest coefficient change
/// is below 1e-8, or after 100 iterations (`converged = false`).
pub fn logistic_fit(design: &Design, labels: &[bool]) -> Result<LogisticFit, StatsError> {
    let x = &design.x;
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(StatsError::NoData);
    }
    if n != labels.len() {
        return Err(StatsError::Design(format!("{n} rows but {} labels", labels.len())));
    }
    if p != design.names.len() {
        return Err(StatsError::Design("column names do not match the matrix".into()));
    }
    if x.column(0).iter().any(|&v| v != 1.0) {
        return Err(StatsError::Design("first column must be the intercept (all ones)".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&b| b as u8 as f64).collect();

    let mut beta = DVector::<f64>::zeros(p);
    let mut ll = log_likelihood(x, &y, &beta);
    let mut path = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut gradient = DVector::<f64>::zeros(p);

    for it in 1..=MAX_IRLS_ITERATIONS {
        iterations = it;
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let resid = DVector::from_iterator(n, y.iter().zip(&mu).map(|(yi, m)| yi - m));
        gradient = x.transpose() * &resid;
        // X' W X with W = mu (1 - mu)
        let mut xw = x.clone();
        for (i, m) in mu.iter().enumerate() {
            let w = m * (1.0 - m);
            xw.row_mut(i).scale_mut(w);
        }
        let info = x.transpose() * xw;
        let step = info
            .cholesky()
            .ok_or(StatsError::SingularDesign)?
            .solve(&gradient);
        if step.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::SingularDesign);
        }
        beta += &step;
        if let Some((index, &value)) = beta
            .iter()
            .enumerate()
            .find(|(_, v)| v.abs() > MAX_ABS_COEFFICIENT)
        {
            return Err(StatsError::SeparationDetected { index, value });
        }
        let new_ll = log_likelihood(x, &y, &beta);
        if new_ll < ll - 1e-10 * (1.0 + ll.abs()) {
            return Err(StatsError::LikelihoodDecreased {
                iteration: it,
                before: ll,
                after: new_ll,
            });
        }
        ll = new_ll;
        path.push(ll);
        if step.amax() < COEFFICIENT_TOLERANCE {
            converged = true;
            let mu = (x * &beta).map(sigmoid);
            let resid = DVector::from_iterator(n, y.iter().zip(mu.iter()).map(|(yi, m)| yi - m));
            gradient = x.transpose() * resid;
            break;
        }
    }

    Ok(LogisticFit {
        predictors: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        log_likelihood: ll,
        converged,
        iterations,
        log_likelihood_path: path,
        gradient_norm: gradient.norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub chi_sq: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `2 (ll_full - ll_reduced)`, clamped at zero, against a chi-square with
/// `df` degrees of freedom.
pub fn likelihood_ratio_test(
    full: &LogisticFit,
    reduced: &LogisticFit,
    df: usize,
) -> Result<LrtResult, StatsError> {
    if df == 0 {
        return Err(StatsError::BadDegreesOfFreedom);
    }
    if !reduced.predictors.iter().all(|p| full.predictors.contains(p)) {
        return Err(StatsError::NotNested {
            full: full.predictors.clone(),
            reduced: reduced.predictors.clone(),
        });
    }
    if !full.converged || !reduced.converged {
        return Err(StatsError::NotConverged);
    }
    let chi_sq = (2.0 * (full.log_likelihood - reduced.log_likelihood)).max(0.0);
    let dist = ChiSquared::new(df as f64).map_err(|_| StatsError::BadDegreesOfFreedom)?;
    let p_value = if chi_sq == 0.0 { 1.0 } else { dist.sf(chi_sq) };
    Ok(LrtResult { chi_sq, df, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimacyRegression {
    pub full: LogisticFit,
    pub reduced: LogisticFit,
    pub lrt: LrtResult,
}

/// Correctness regressed on subject animacy, object animacy and their
/// interaction, tested against the intercept-only model.
pub fn animacy_regression(responses: &[ResponseRecord]) -> Result<AnimacyRegression, StatsError> {
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
    let rows: Vec<Vec<f64>> = critical
        .iter()
        .map(|r| {
            let c = r.condition.expect("checked above");
            let s = c.subject_animate as u8 as f64;
            let o = c.object_animate as u8 as f64;
            vec![1.0, s, o, s * o]
        })
        .collect();
    let labels: Vec<bool> = critical.iter().map(|r| r.correct).collect();
    let design = Design::new(
        &["intercept", "subject_animate", "object_animate", "subject_x_object"],
        &rows,
    )?;
    let full = logistic_fit(&design, &labels)?;
    let reduced = logistic_fit(&design.select(&["intercept"])?, &labels)?;
    let lrt = likelihood_ratio_test(&full, &reduced, 3)?;
    Ok(AnimacyRegression { full, reduced, lrt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::AnimacyCondition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intercept_only(n: usize) -> Design {
        Design::new(&["intercept"], &vec![vec![1.0]; n]).unwrap()
    }

    #[test]
    fn balanced_intercept_is_zero() {
        let labels: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let fit = logistic_fit(&intercept_only(100), &labels).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-8);
        assert!(fit.converged);
        assert!((fit.log_likelihood - 100.0 * 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn intercept_matches_log_odds() {
        let labels: Vec<bool> = (0..40).map(|i| i % 4 != 0).collect();
        let fit = logistic_fit(&intercept_only(40), &labels).unwrap();
        assert!((fit.coefficients[0] - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn perfect_predictor_is_separation() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, (i % 2) as f64]).collect();
        let labels: Vec<bool> = (0..20).map(|i| i % 2 == 1).collect();
        let d = Design::new(&["intercept", "x"], &rows).unwrap();
        assert!(matches!(logistic_fit(&d, &labels), Err(StatsError::SeparationDetected { .. })));
    }

    #[test]
    fn collinear_columns_are_singular() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let labels: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let d = Design::new(&["intercept", "x", "x2"], &rows).unwrap();
        assert_eq!(logistic_fit(&d, &labels), Err(StatsError::SingularDesign));
    }

    #[test]
    fn missing_intercept_is_rejected() {
        let d = Design::new(&["x"], &[vec![2.0], vec![3.0]]).unwrap();
        assert!(matches!(logistic_fit(&d, &[true, false]), Err(StatsError::Design(_))));
    }

    fn synthetic(n: usize, seed: u64) -> (Design, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(-2.0..2.0);
            let p = sigmoid(0.5 - 1.0 * x);
            rows.push(vec![1.0, x]);
            labels.push(rng.gen::<f64>() < p);
        }
        (Design::new(&["intercept", "x"], &rows).unwrap(), labels)
    }

    #[test]
    fn recovers_generating_coefficients() {
        let (d, y) = synthetic(10_000, 42);
        let fit = logistic_fit(&d, &y).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - 0.5).abs() < 0.1, "{:?}", fit.coefficients);
        assert!((fit.coefficients[1] + 1.0).abs() < 0.1, "{:?}", fit.coefficients);
        assert!(fit.gradient_norm < 1e-6);
        for w in fit.log_likelihood_path.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", fit.log_likelihood_path);
        }
    }

    fn fit_with_ll(predictors: &[&str], ll: f64) -> LogisticFit {
        LogisticFit {
            predictors: predictors.iter().map(|s| s.to_string()).collect(),
            coefficients: vec![0.0; predictors.len()],
            log_likelihood: ll,
            converged: true,
            iterations: 1,
            log_likelihood_path: vec![ll],
            gradient_norm: 0.0,
        }
    }

    #[test]
    fn lrt_identical_models() {
        let f = fit_with_ll(&["intercept", "x"], -50.0);
        let r = likelihood_ratio_test(&f, &f, 1).unwrap();
        assert_eq!((r.chi_sq, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn lrt_chi_square_six() {
        let full = fit_with_ll(&["intercept", "x"], -100.0);
        let reduced = fit_with_ll(&["intercept"], -103.0);
        let r = likelihood_ratio_test(&full, &reduced, 1).unwrap();
        assert!((r.chi_sq - 6.0).abs() < 1e-12);
        // upper tail of chi-square(1) at 6
        assert!((r.p_value - 0.014_305_878_435_429_64).abs() < 1e-9, "{}", r.p_value);
    }

    #[test]
    fn lrt_clamps_noise() {
        let full = fit_with_ll(&["intercept", "x"], -100.000_000_001);
        let reduced = fit_with_ll(&["intercept"], -100.0);
        let r = likelihood_ratio_test(&full, &reduced, 1).unwrap();
        assert_eq!(r.chi_sq, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn lrt_errors() {
        let full = fit_with_ll(&["intercept", "x"], -100.0);
        let other = fit_with_ll(&["intercept", "z"], -103.0);
        assert!(matches!(likelihood_ratio_test(&full, &other, 1), Err(StatsError::NotNested { .. })));
        let mut unconverged = fit_with_ll(&["intercept"], -103.0);
        unconverged.converged = false;
        assert_eq!(likelihood_ratio_test(&full, &unconverged, 1), Err(StatsError::NotConverged));
        assert_eq!(
            likelihood_ratio_test(&full, &full, 0),
            Err(StatsError::BadDegreesOfFreedom)
        );
    }

    #[test]
    fn animacy_regression_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut records = Vec::new();
        for i in 0..400 {
            let c = AnimacyCondition::ALL[i % 4];
            let p = if c.subject_animate && !c.object_animate { 0.95 } else { 0.75 };
            records.push(ResponseRecord {
                participant_id: format!("p{}", i % 10),
                item_id: format!("i{i}"),
                correct: rng.gen::<f64>() < p,
                is_catch: false,
                condition: Some(c),
            });
        }
        let a = animacy_regression(&records).unwrap();
        assert_eq!(a.full.coefficients.len(), 4);
        assert_eq!(a.lrt.df, 3);
        assert!(a.lrt.chi_sq > 0.0);
        assert!(a.full.log_likelihood >= a.reduced.log_likelihood);
    }
}
