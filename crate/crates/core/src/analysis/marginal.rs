use alloc::vec::Vec;

use crate::distributions::{logistic_log_density, LOG_SCALE_MAX, LOG_SCALE_MIN};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{self, LN_2PI};
use crate::model::{generate, recognize_one, ModelParams};
use crate::rng::{self, Stream};

/// Importance-sampled `p(x | h_i = value)`, reported in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalEstimate {
    pub log_value: f64,
    /// Standard error of the estimate divided by the estimate.
    pub relative_std_error: f64,
    pub samples: usize,
}

const CHUNK: usize = 2048;

/// Draws the other units from the approximate posterior `q(h_{j≠i} | x)` and
/// averages `p(x | h) p(h_{j≠i}) / q(h_{j≠i} | x)` with a log-sum-exp reduction.
pub fn marginal_importance_estimate(
    params: &ModelParams,
    unit: usize,
    value: f64,
    x: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MarginalEstimate> {
    if samples == 0 {
        return Err(Error::argument("marginal estimate needs at least one sample"));
    }
    let k = params.latent_dim();
    let d = params.data_dim();
    if unit >= k {
        return Err(Error::argument(alloc::format!("latent unit {unit} out of range (K = {k})")));
    }
    if x.len() != d {
        return Err(Error::shape("marginal datum width", d, x.len()));
    }
    let q = recognize_one(params, x)?;
    let mut r = rng::stream(seed, Stream::Evaluation, 1);
    let mut log_w = Vec::with_capacity(samples);
    let mut done = 0;
    while done < samples {
        let rows = CHUNK.min(samples - done);
        let mut h = Matrix::zeros(rows, k);
        let mut log_ratio = Vec::with_capacity(rows);
        for row in 0..rows {
            let hr = h.row_mut(row);
            let mut lr = 0.0;
            for j in 0..k {
                if j == unit {
                    hr[j] = value;
                    continue;
                }
                let eps = rng::open_uniform(&mut r);
                hr[j] = q.center[j] + math::logit(eps) * q.scale(j);
                lr += logistic_log_density(hr[j], params.prior.center[j], params.prior.log_scale[j])
                    - logistic_log_density(hr[j], q.center[j], q.log_scale[j]);
            }
            log_ratio.push(lr);
        }
        let g = generate(params, &h)?;
        for (row, lr) in log_ratio.into_iter().enumerate() {
            let mut lik = 0.0;
            for ((&xi, &m), &ls) in x.iter().zip(g.mean.row(row)).zip(g.log_sigma.row(row)) {
                let ls = ls.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
                let z = (xi - m) * math::exp(-ls);
                lik += -ls - 0.5 * LN_2PI - 0.5 * z * z;
            }
            log_w.push(lik + lr);
        }
        done += rows;
    }
    let n = samples as f64;
    let log_value = math::log_sum_exp(&log_w) - math::ln(n);
    if !log_value.is_finite() {
        return Err(Error::non_finite("marginal importance weights"));
    }
    let relative_std_error = if samples > 1 {
        let scaled: Vec<f64> = log_w.iter().map(|lw| math::exp(lw - log_value)).collect();
        let var = scaled.iter().map(|w| (w - 1.0) * (w - 1.0)).sum::<f64>() / (n - 1.0);
        math::sqrt(var / n)
    } else {
        f64::INFINITY
    };
    Ok(MarginalEstimate {
        log_value,
        relative_std_error,
        samples,
    })
}
