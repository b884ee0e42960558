use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, Matrix};
use crate::math;
use crate::rng::{self, Stream};

const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100_000;
const OBJECTIVE_ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// `folds × K` fitted coefficients (intercept excluded).
    pub fold_betas: Matrix,
    pub fold_intercepts: Vec<f64>,
    /// Folds actually used.
    pub folds: usize,
    pub requested_folds: usize,
    /// `requested_folds` exceeded the smallest class and was reduced.
    pub clamped: bool,
}

/// `min(100, smallest class size)`.
pub fn default_folds(labels: &[u8]) -> usize {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.len() - ones;
    100.min(ones.min(zeros))
}

/// Fold index per sample. Each class is shuffled and dealt round-robin, the
/// second class continuing where the first stopped, so every fold holds
/// `floor` or `ceil` of its share of each class.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, Stream::Folds, 0);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng::shuffle(&mut idx, &mut r);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// L2-regularized logistic regression with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogisticFit {
    pub fn probability(&self, x: &[f64]) -> f64 {
        math::sigmoid(self.intercept + dot(&self.coefficients, x))
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.probability(x) >= 0.5)
    }

    /// Maximizes `mean log-likelihood - (l2 / 2) ||β||²` by damped Newton ascent,
    /// stopping once the gradient norm drops below `1e-8` or after `10^5` iterations.
    pub fn fit(x: &Matrix, y: &[u8], l2: f64) -> Result<LogisticFit> {
        let n = x.rows();
        let p = x.cols() + 1;
        if n == 0 || y.len() != n {
            return Err(Error::shape("logistic regression labels", n, y.len()));
        }
        let mut theta = vec![0.0; p];
        let mut obj = objective(x, y, &theta, l2);
        let mut iterations = 0;
        let mut gnorm = f64::INFINITY;
        while iterations < MAX_ITERATIONS {
            let (grad, neg_hess) = gradient_and_curvature(x, y, &theta, l2);
            gnorm = math::sqrt(dot(&grad, &grad));
            if gnorm < GRADIENT_TOLERANCE {
                break;
            }
            iterations += 1;
            let direction = match cholesky_solve(&neg_hess, &grad) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                // Curvature vanished numerically: fall back to a plain gradient step.
                _ => {
                    let lipschitz = 0.25 * x.as_slice().iter().map(|v| v * v).sum::<f64>() / n as f64 + 0.25 + l2;
                    grad.iter().map(|g| g / lipschitz).collect()
                }
            };
            // Near the optimum the objective change drops below its own round-off,
            // so a full step within that noise is taken rather than halved away.
            let slack = OBJECTIVE_ROUNDOFF * (1.0 + obj.abs());
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = theta.iter().zip(&direction).map(|(t, d)| t + step * d).collect();
                let trial_obj = objective(x, y, &trial, l2);
                if trial_obj > obj || (step == 1.0 && trial_obj >= obj - slack) {
                    theta = trial;
                    obj = trial_obj;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(LogisticFit {
            intercept: theta[0],
            coefficients: theta[1..].to_vec(),
            iterations,
            gradient_norm: gnorm,
        })
    }
}

fn linear_predictor(x: &[f64], theta: &[f64]) -> f64 {
    theta[0] + dot(&theta[1..], x)
}

fn objective(x: &Matrix, y: &[u8], theta: &[f64], l2: f64) -> f64 {
    let n = x.rows();
    let mut ll = 0.0;
    for i in 0..n {
        let eta = linear_predictor(x.row(i), theta);
        // log σ(η) = -softplus(-η), log(1 - σ(η)) = -softplus(η)
        ll -= if y[i] == 1 { math::softplus(-eta) } else { math::softplus(eta) };
    }
    let penalty: f64 = theta[1..].iter().map(|b| b * b).sum();
    ll / n as f64 - 0.5 * l2 * penalty
}

fn gradient_and_curvature(x: &Matrix, y: &[u8], theta: &[f64], l2: f64) -> (Vec<f64>, Matrix) {
    let n = x.rows();
    let p = theta.len();
    let mut grad = vec![0.0; p];
    let mut h = Matrix::zeros(p, p);
    let mut z = vec![1.0; p];
    for i in 0..n {
        z[1..].copy_from_slice(x.row(i));
        let mu = math::sigmoid(linear_predictor(x.row(i), theta));
        let r = f64::from(y[i]) - mu;
        let w = mu * (1.0 - mu);
        for a in 0..p {
            grad[a] += r * z[a];
            let ha = h.row_mut(a);
            for b in 0..p {
                ha[b] += w * z[a] * z[b];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..p {
        grad[a] *= inv_n;
        for b in 0..p {
            h.set(a, b, h.get(a, b) * inv_n);
        }
        if a > 0 {
            grad[a] -= l2 * theta[a];
            h.set(a, a, h.get(a, a) + l2);
        }
    }
    (grad, h)
}

/// Class-balanced k-fold cross-validation of logistic regression on `features`.
pub fn classify_cv(features: &Matrix, labels: &[u8], folds: usize, l2: f64, seed: u64) -> Result<ClassificationReport> {
    let n = features.rows();
    if labels.len() != n {
        return Err(Error::shape("classification labels", n, labels.len()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::argument("labels must be 0 or 1"));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let smallest = ones.min(n - ones);
    if smallest == 0 {
        return Err(Error::argument("classification needs both classes present"));
    }
    if folds < 2 {
        return Err(Error::argument(format!("at least 2 folds required, got {folds}")));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::argument("l2 penalty must be non-negative"));
    }
    let used = folds.min(smallest);
    if used < 2 {
        return Err(Error::argument(format!(
            "smallest class has {smallest} member(s); cannot form 2 folds"
        )));
    }
    let assignment = stratified_folds(labels, used, seed);
    let mut fold_accuracies = Vec::with_capacity(used);
    let mut fold_betas = Matrix::zeros(used, features.cols());
    let mut fold_intercepts = Vec::with_capacity(used);
    for f in 0..used {
        let train_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
        let xtr = features.select_rows(&train_idx);
        let ytr: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
        let fit = LogisticFit::fit(&xtr, &ytr, l2)?;
        let correct = test_idx
            .iter()
            .filter(|&&i| fit.predict(features.row(i)) == labels[i])
            .count();
        fold_accuracies.push(correct as f64 / test_idx.len() as f64);
        fold_betas.row_mut(f).copy_from_slice(&fit.coefficients);
        fold_intercepts.push(fit.intercept);
    }
    Ok(ClassificationReport {
        mean_accuracy: math::mean(&fold_accuracies),
        fold_accuracies,
        fold_betas,
        fold_intercepts,
        folds: used,
        requested_folds: folds,
        clamped: used < folds,
    })
}
