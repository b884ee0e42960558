//! Factorized logistic and diagonal Gaussian distributions.
//!
//! Scales are stored as logarithms. The logistic log-density is evaluated as
//! `-z - log s - 2 softplus(-z)` with `z = (h - μ) / s`, which stays finite
//! for any `|z|`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, LN_2PI};

/// Bounds applied to every log-scale and log-sigma.
pub const LOG_SCALE_MIN: f64 = -7.0;
pub const LOG_SCALE_MAX: f64 = 7.0;

#[inline]
pub fn clamp_log_scale(v: f64) -> f64 {
    v.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticDiag {
    pub center: Vec<f64>,
    pub log_scale: Vec<f64>,
}

impl LogisticDiag {
    pub fn new(center: Vec<f64>, log_scale: Vec<f64>) -> Result<Self> {
        if center.len() != log_scale.len() {
            return Err(Error::shape("logistic parameters", center.len(), log_scale.len()));
        }
        Ok(LogisticDiag { center, log_scale })
    }

    /// Zero center, unit scale.
    pub fn standard(dim: usize) -> Self {
        LogisticDiag {
            center: alloc::vec![0.0; dim],
            log_scale: alloc::vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn scale(&self, i: usize) -> f64 {
        math::exp(self.log_scale[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDiag {
    pub mean: Vec<f64>,
    /// Log of the standard deviation (not the variance).
    pub log_sigma: Vec<f64>,
}

impl GaussianDiag {
    pub fn new(mean: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        if mean.len() != log_sigma.len() {
            return Err(Error::shape("gaussian parameters", mean.len(), log_sigma.len()));
        }
        Ok(GaussianDiag { mean, log_sigma })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Log-density of a single logistic coordinate.
#[inline]
pub fn logistic_log_density(h: f64, center: f64, log_scale: f64) -> f64 {
    let z = (h - center) / math::exp(log_scale);
    logistic_kernel(z) - log_scale
}

/// `-z - 2 softplus(-z)`, written in terms of `|z|` so it is exactly even.
#[inline]
pub(crate) fn logistic_kernel(z: f64) -> f64 {
    let a = z.abs();
    -a - 2.0 * math::ln_1p(math::exp(-a))
}

/// `d/dz` of `-z - 2 softplus(-z)`, i.e. `1 - 2σ(z) = -tanh(z/2)`.
#[inline]
pub(crate) fn logistic_score(z: f64) -> f64 {
    -math::tanh(0.5 * z)
}

/// Per-dimension log-density of `h` under `p`.
pub fn logistic_log_pdf(h: &[f64], p: &LogisticDiag) -> Result<Vec<f64>> {
    if h.len() != p.dim() {
        return Err(Error::shape("logistic_log_pdf", p.dim(), h.len()));
    }
    Ok(h.iter()
        .zip(p.center.iter().zip(&p.log_scale))
        .map(|(&x, (&mu, &ls))| logistic_log_density(x, mu, ls))
        .collect())
}

/// Per-dimension log-density under the zero-center, unit-scale logistic.
pub fn standard_logistic_log_pdf(h: &[f64]) -> Vec<f64> {
    h.iter().map(|&x| logistic_log_density(x, 0.0, 0.0)).collect()
}

/// Reparameterized draw `h = μ + log(ε / (1 - ε)) ⊙ s`.
pub fn logistic_sample(p: &LogisticDiag, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != p.dim() {
        return Err(Error::shape("logistic_sample", p.dim(), eps.len()));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::Domain("logistic_sample: uniform variates must lie strictly inside (0, 1)"));
    }
    Ok(eps
        .iter()
        .enumerate()
        .map(|(i, &e)| p.center[i] + math::logit(e) * p.scale(i))
        .collect())
}

/// Analytic entropy, `Σ (log s_i + 2)`.
pub fn logistic_entropy(p: &LogisticDiag) -> f64 {
    p.log_scale.iter().map(|ls| ls + 2.0).sum()
}

/// Summed log-density of `x` under a diagonal Gaussian.
pub fn gaussian_log_pdf(x: &[f64], p: &GaussianDiag) -> Result<f64> {
    if x.len() != p.dim() {
        return Err(Error::shape("gaussian_log_pdf", p.dim(), x.len()));
    }
    Ok(gaussian_log_pdf_slices(x, &p.mean, &p.log_sigma))
}

pub(crate) fn gaussian_log_pdf_slices(x: &[f64], mean: &[f64], log_sigma: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((&xi, &mi), &ls) in x.iter().zip(mean).zip(log_sigma) {
        let r = (xi - mi) * math::exp(-ls);
        s += -ls - 0.5 * LN_2PI - 0.5 * r * r;
    }
    s
}

/// Logistic cumulative distribution function.
pub fn logistic_cdf(h: f64, center: f64, log_scale: f64) -> f64 {
    math::sigmoid((h - center) / math::exp(log_scale))
}
