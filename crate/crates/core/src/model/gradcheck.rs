//! Central-difference verification of the analytic bound gradient.

use alloc::vec::Vec;

use super::{elbo_gradients_with_noise, elbo_with_noise, ModelParams, BLOCK_NAMES};
use crate::error::Result;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: &'static str,
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)` over the block.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn worst(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failing(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| !b.passed)
    }
}

/// Central differences of the bound for fixed noise, one parameter at a time.
pub fn numeric_gradients(params: &ModelParams, batch: &Matrix, noise: &Matrix, step: f64) -> Result<ModelParams> {
    let mut grads = params.zeros_like();
    let mut probe = params.clone();
    for b in 0..BLOCK_NAMES.len() {
        let len = params.blocks()[b].len();
        for i in 0..len {
            let orig = params.blocks()[b][i];
            probe.blocks_mut()[b][i] = orig + step;
            let up = elbo_with_noise(batch, &probe, noise)?.elbo;
            probe.blocks_mut()[b][i] = orig - step;
            let down = elbo_with_noise(batch, &probe, noise)?.elbo;
            probe.blocks_mut()[b][i] = orig;
            grads.blocks_mut()[b][i] = (up - down) / (2.0 * step);
        }
    }
    Ok(grads)
}

pub fn compare_gradients(analytic: &ModelParams, numeric: &ModelParams, tolerance: f64) -> GradCheckReport {
    let blocks = analytic
        .blocks()
        .iter()
        .zip(numeric.blocks().iter())
        .zip(BLOCK_NAMES)
        .map(|((a, n), name)| {
            let mut worst = 0.0;
            let mut worst_index = 0;
            for (i, (&x, &y)) in a.iter().zip(n.iter()).enumerate() {
                let denom = x.abs().max(y.abs()).max(1e-8);
                let rel = (x - y).abs() / denom;
                // NaN compares false, so force it to register.
                if rel > worst || rel.is_nan() {
                    worst = if rel.is_nan() { f64::INFINITY } else { rel };
                    worst_index = i;
                }
            }
            BlockReport {
                name,
                max_rel_error: worst,
                worst_index,
                passed: worst < tolerance,
            }
        })
        .collect();
    GradCheckReport { tolerance, blocks }
}

/// Analytic gradient against central differences for the given noise.
pub fn grad_check(
    params: &ModelParams,
    batch: &Matrix,
    noise: &Matrix,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (analytic, _) = elbo_gradients_with_noise(batch, params, noise)?;
    let numeric = numeric_gradients(params, batch, noise, step)?;
    Ok(compare_gradients(&analytic, &numeric, tolerance))
}
