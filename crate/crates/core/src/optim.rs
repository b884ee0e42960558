//! RMSprop ascent on the bound and the epoch / minibatch training loop.
//!
//! Randomness per epoch comes from two sub-streams keyed by the epoch index
//! (row shuffling and reparameterization noise), so a run can be stopped
//! after any epoch and resumed from its checkpoint with identical results.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Standardization;
use crate::distributions::clamp_log_scale;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{elbo_gradients_with_noise, Architecture, ModelParams, BLOCK_NAMES};
use crate::rng::{self, Stream};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub latent_dim: usize,
    pub recognition_hidden: usize,
    pub generation_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            decay: 0.9,
            epsilon: 1e-6,
            batch_size: 10,
            epochs: 1000,
            mc_samples: 1,
            seed: 0,
            latent_dim: 64,
            recognition_hidden: 500,
            generation_hidden: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::argument(format!("train config: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1");
        }
        if self.latent_dim == 0 || self.recognition_hidden == 0 || self.generation_hidden == 0 {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    pub fn architecture(&self, data_dim: usize) -> Architecture {
        Architecture::new(data_dim, self.latent_dim, self.recognition_hidden, self.generation_hidden)
    }
}

/// Running mean of squared gradients, one accumulator per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsState {
    pub accumulators: ModelParams,
    pub step_count: u64,
}

impl RmsState {
    pub fn new(params: &ModelParams) -> Self {
        RmsState {
            accumulators: params.zeros_like(),
            step_count: 0,
        }
    }
}

/// Elementwise RMSprop ascent:
/// `r ← decay·r + (1 − decay)·g²`, `θ ← θ + η·g / (√r + ε)`.
pub fn rmsprop_update(values: &mut [f64], grads: &[f64], acc: &mut [f64], learning_rate: f64, decay: f64, epsilon: f64) {
    for ((v, &g), r) in values.iter_mut().zip(grads).zip(acc.iter_mut()) {
        *r = decay * *r + (1.0 - decay) * g * g;
        *v += learning_rate * g / (math::sqrt(*r) + epsilon);
    }
}

/// One ascent step on every block, followed by the prior log-scale clamp.
/// Nothing is modified if any gradient is non-finite.
pub fn rmsprop_step(params: &mut ModelParams, grads: &ModelParams, state: &mut RmsState, config: &TrainConfig) -> Result<()> {
    let shapes = params.block_shapes();
    if grads.block_shapes() != shapes || state.accumulators.block_shapes() != shapes {
        return Err(Error::argument("gradient or optimizer state shape differs from parameters"));
    }
    for (name, block) in BLOCK_NAMES.iter().zip(grads.blocks()) {
        if block.iter().any(|g| !g.is_finite()) {
            return Err(Error::non_finite(format!("gradient block {name}")));
        }
    }
    let grad_blocks = grads.blocks();
    let acc_blocks = state.accumulators.blocks_mut();
    for ((values, g), acc) in params.blocks_mut().into_iter().zip(grad_blocks).zip(acc_blocks) {
        rmsprop_update(values, g, acc, config.learning_rate, config.decay, config.epsilon);
    }
    for ls in params.prior.log_scale.iter_mut() {
        *ls = clamp_log_scale(*ls);
    }
    state.step_count += 1;
    Ok(())
}

/// Everything needed to use or continue a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    /// Mean bound over the data, one entry per completed epoch.
    pub elbo_trace: Vec<f64>,
    pub data_stats: Standardization,
    pub optimizer: RmsState,
    pub format_version: u32,
}

impl Checkpoint {
    pub fn epochs_completed(&self) -> usize {
        self.elbo_trace.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    /// Zero-based.
    pub epoch: usize,
    pub elbo: f64,
    pub batches: usize,
}

/// Trains from a fresh seeded initialization. `data` must already be standardized.
pub fn train(
    data: &Matrix,
    config: &TrainConfig,
    data_stats: Standardization,
    observer: &mut dyn FnMut(&EpochReport),
) -> Result<Checkpoint> {
    config.validate()?;
    check_data(data, config)?;
    let params = ModelParams::init(&config.architecture(data.cols()), config.seed);
    let mut checkpoint = Checkpoint {
        optimizer: RmsState::new(&params),
        params,
        config: config.clone(),
        elbo_trace: Vec::new(),
        data_stats,
        format_version: CHECKPOINT_FORMAT_VERSION,
    };
    run_epochs(&mut checkpoint, data, observer)?;
    Ok(checkpoint)
}

/// Continues a checkpoint for `additional_epochs` more epochs.
pub fn resume(
    checkpoint: &mut Checkpoint,
    data: &Matrix,
    additional_epochs: usize,
    observer: &mut dyn FnMut(&EpochReport),
) -> Result<()> {
    checkpoint.config.validate()?;
    check_data(data, &checkpoint.config)?;
    if data.cols() != checkpoint.params.data_dim() {
        return Err(Error::shape("resume data width", checkpoint.params.data_dim(), data.cols()));
    }
    checkpoint.config.epochs = checkpoint.elbo_trace.len() + additional_epochs;
    run_epochs(checkpoint, data, observer)
}

fn check_data(data: &Matrix, config: &TrainConfig) -> Result<()> {
    if data.rows() == 0 || data.cols() == 0 {
        return Err(Error::argument("empty dataset"));
    }
    if data.rows() < config.batch_size {
        return Err(Error::argument(format!(
            "dataset has {} rows, fewer than batch_size {}",
            data.rows(),
            config.batch_size
        )));
    }
    if data.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("training data"));
    }
    Ok(())
}

fn run_epochs(cp: &mut Checkpoint, data: &Matrix, observer: &mut dyn FnMut(&EpochReport)) -> Result<()> {
    let n = data.rows();
    let k = cp.params.latent_dim();
    let config = cp.config.clone();
    let m = config.mc_samples;
    for epoch in cp.elbo_trace.len()..config.epochs {
        let order = rng::permutation(n, &mut rng::stream(config.seed, Stream::Shuffle, epoch as u64));
        let mut noise_rng = rng::stream(config.seed, Stream::TrainNoise, epoch as u64);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            let diverged = |e: Error| Error::Diverged {
                epoch,
                batch: b,
                source: Box::new(e),
            };
            let xb = data.select_rows(rows);
            let noise = Matrix::from_fn(rows.len() * m, k, |_, _| rng::open_uniform(&mut noise_rng));
            let (grads, bound) = elbo_gradients_with_noise(&xb, &cp.params, &noise).map_err(diverged)?;
            rmsprop_step(&mut cp.params, &grads, &mut cp.optimizer, &config).map_err(diverged)?;
            total += bound.elbo * rows.len() as f64;
            batches += 1;
        }
        let elbo = total / n as f64;
        if !elbo.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches.saturating_sub(1),
                source: Box::new(Error::non_finite("epoch mean bound")),
            });
        }
        cp.elbo_trace.push(elbo);
        observer(&EpochReport { epoch, elbo, batches });
    }
    Ok(())
}
