//! Monte-Carlo variational lower bound and its exact reverse-mode gradient.
//!
//! For each datum `x_n` and each uniform draw `ε`, the latent sample is
//! `h = μ_h(x_n) + logit(ε) ⊙ s_h(x_n)` and the bound term is
//!
//! ```text
//! log p(x_n | h; Θ) + log p(h; ρ) - log q(h | x_n; Ψ)
//! ```
//!
//! averaged over data and draws. Noise rows are laid out datum-major: row
//! `n * M + m` holds draw `m` for datum `n`.

use alloc::format;

use super::{ModelParams, NetworkPass};
use crate::distributions::{logistic_kernel, logistic_score, LOG_SCALE_MAX, LOG_SCALE_MIN};
use crate::error::{Error, Result};
use crate::linalg::{affine_input_grad, affine_param_grads, Matrix};
use crate::math::{self, LN_2PI};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboBreakdown {
    pub elbo: f64,
    /// Mean `log p(x | h)`.
    pub recon: f64,
    /// Mean `log p(h)`.
    pub log_prior: f64,
    /// Mean `-log q(h | x)`.
    pub neg_log_q: f64,
}

/// Uniform(0, 1) noise for `rows` data and `samples` draws each.
pub fn draw_noise(rows: usize, latent_dim: usize, samples: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, Stream::Evaluation, 0);
    Matrix::from_fn(rows * samples, latent_dim, |_, _| rng::open_uniform(&mut r))
}

pub fn elbo_estimate(batch: &Matrix, params: &ModelParams, samples: usize, seed: u64) -> Result<ElboBreakdown> {
    check_samples(samples)?;
    let noise = draw_noise(batch.rows(), params.latent_dim(), samples, seed);
    elbo_with_noise(batch, params, &noise)
}

pub fn elbo_gradients(
    batch: &Matrix,
    params: &ModelParams,
    samples: usize,
    seed: u64,
) -> Result<(ModelParams, ElboBreakdown)> {
    check_samples(samples)?;
    let noise = draw_noise(batch.rows(), params.latent_dim(), samples, seed);
    elbo_gradients_with_noise(batch, params, &noise)
}

/// Bound estimate for explicit noise; the sample count is `noise.rows() / batch.rows()`.
pub fn elbo_with_noise(batch: &Matrix, params: &ModelParams, noise: &Matrix) -> Result<ElboBreakdown> {
    Ok(Forward::run(batch, params, noise)?.breakdown)
}

pub fn elbo_gradients_with_noise(
    batch: &Matrix,
    params: &ModelParams,
    noise: &Matrix,
) -> Result<(ModelParams, ElboBreakdown)> {
    let fwd = Forward::run(batch, params, noise)?;
    let grads = fwd.backward(batch, params);
    Ok((grads, fwd.breakdown))
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::argument("Monte-Carlo sample count must be at least 1"));
    }
    Ok(())
}

#[inline]
fn in_clamp_range(v: f64) -> bool {
    (LOG_SCALE_MIN..=LOG_SCALE_MAX).contains(&v)
}

struct Forward {
    samples: usize,
    rec: NetworkPass,
    /// `logit(ε)` per noise row.
    logits: Matrix,
    h: Matrix,
    gen: NetworkPass,
    breakdown: ElboBreakdown,
}

impl Forward {
    fn run(x: &Matrix, params: &ModelParams, noise: &Matrix) -> Result<Self> {
        let d = params.data_dim();
        let k = params.latent_dim();
        let n = x.rows();
        if n == 0 {
            return Err(Error::argument("empty batch"));
        }
        if x.cols() != d {
            return Err(Error::shape("batch width", d, x.cols()));
        }
        if noise.cols() != k {
            return Err(Error::shape("noise width", k, noise.cols()));
        }
        if noise.rows() == 0 || !noise.rows().is_multiple_of(n) {
            return Err(Error::argument(format!(
                "noise rows ({}) must be a positive multiple of batch rows ({n})",
                noise.rows()
            )));
        }
        let samples = noise.rows() / n;

        let mut logits = noise.clone();
        for e in logits.as_mut_slice() {
            if !(*e > 0.0 && *e < 1.0) {
                return Err(Error::Domain("noise variates must lie strictly inside (0, 1)"));
            }
            *e = math::logit(*e);
        }

        let rec = params.recognition.pass(x)?;
        let mut h = Matrix::zeros(n * samples, k);
        for row in 0..n * samples {
            let q = rec.out.row(row / samples);
            let l = logits.row(row);
            for (j, slot) in h.row_mut(row).iter_mut().enumerate() {
                let ls = q[k + j].clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
                *slot = q[j] + l[j] * math::exp(ls);
            }
        }
        let gen = params.generation.pass(&h)?;

        let mut recon = 0.0;
        let mut log_prior = 0.0;
        let mut log_q = 0.0;
        for row in 0..n * samples {
            let xr = x.row(row / samples);
            let g = gen.out.row(row);
            for (i, &xi) in xr.iter().enumerate() {
                let ls = g[d + i].clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
                let r = (xi - g[i]) * math::exp(-ls);
                recon += -ls - 0.5 * LN_2PI - 0.5 * r * r;
            }
            let q = rec.out.row(row / samples);
            for (j, &hj) in h.row(row).iter().enumerate() {
                let pls = params.prior.log_scale[j];
                log_prior += logistic_kernel((hj - params.prior.center[j]) / math::exp(pls)) - pls;
                let qls = q[k + j].clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
                log_q += logistic_kernel((hj - q[j]) / math::exp(qls)) - qls;
            }
        }
        let count = (n * samples) as f64;
        let recon = recon / count;
        let log_prior = log_prior / count;
        let neg_log_q = -log_q / count;
        for (name, v) in [
            ("reconstruction log-likelihood", recon),
            ("log prior", log_prior),
            ("negative log posterior", neg_log_q),
        ] {
            if !v.is_finite() {
                return Err(Error::non_finite(name));
            }
        }
        let breakdown = ElboBreakdown {
            // Grouped so that q = p cancels exactly.
            elbo: recon + (log_prior + neg_log_q),
            recon,
            log_prior,
            neg_log_q,
        };
        Ok(Forward {
            samples,
            rec,
            logits,
            h,
            gen,
            breakdown,
        })
    }

    fn backward(&self, x: &Matrix, params: &ModelParams) -> ModelParams {
        let d = params.data_dim();
        let k = params.latent_dim();
        let n = x.rows();
        let rows = n * self.samples;
        let w = 1.0 / rows as f64;
        let mut grads = params.zeros_like();

        // Gaussian likelihood -> generation outputs.
        let mut d_gen_out = Matrix::zeros(rows, 2 * d);
        for row in 0..rows {
            let xr = x.row(row / self.samples);
            let g = self.gen.out.row(row);
            let dg = d_gen_out.row_mut(row);
            for (i, &xi) in xr.iter().enumerate() {
                let raw = g[d + i];
                let ls = raw.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
                let inv_var = math::exp(-2.0 * ls);
                let resid = xi - g[i];
                dg[i] = w * resid * inv_var;
                if in_clamp_range(raw) {
                    dg[d + i] = w * (resid * resid * inv_var - 1.0);
                }
            }
        }
        let d_h = backprop_network(&params.generation, &self.gen, &self.h, &d_gen_out, &mut grads.generation);
        let mut d_h = d_h;

        // Prior and posterior terms, then the reparameterization h = μ + ℓ s.
        let mut d_rec_out = Matrix::zeros(n, 2 * k);
        for row in 0..rows {
            let datum = row / self.samples;
            let q = self.rec.out.row(datum);
            let hr = self.h.row(row);
            let lr = self.logits.row(row);
            let dh = d_h.row_mut(row);
            let dq = d_rec_out.row_mut(datum);
            for j in 0..k {
                let ps = math::exp(params.prior.log_scale[j]);
                let zp = (hr[j] - params.prior.center[j]) / ps;
                let fp = logistic_score(zp);
                dh[j] += w * fp / ps;
                grads.prior.center[j] -= w * fp / ps;
                grads.prior.log_scale[j] += w * (-zp * fp - 1.0);

                let raw = q[k + j];
                let qs = math::exp(raw.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX));
                let zq = (hr[j] - q[j]) / qs;
                let fq = logistic_score(zq);
                dh[j] -= w * fq / qs;
                dq[j] += w * fq / qs + dh[j];
                if in_clamp_range(raw) {
                    dq[k + j] += w * (zq * fq + 1.0) + dh[j] * lr[j] * qs;
                }
            }
        }
        backprop_network(&params.recognition, &self.rec, x, &d_rec_out, &mut grads.recognition);
        grads
    }
}

/// Accumulates parameter gradients of a two-layer network and returns the
/// gradient with respect to its input.
fn backprop_network(
    net: &super::Network,
    pass: &NetworkPass,
    input: &Matrix,
    d_out: &Matrix,
    grads: &mut super::Network,
) -> Matrix {
    affine_param_grads(d_out, &pass.post, &mut grads.output.weights, &mut grads.output.bias);
    let mut d_hidden = affine_input_grad(d_out, &net.output.weights);
    for ((g, &a), &y) in d_hidden
        .as_mut_slice()
        .iter_mut()
        .zip(pass.pre.as_slice())
        .zip(pass.post.as_slice())
    {
        *g *= net.activation_derivative(a, y);
    }
    affine_param_grads(&d_hidden, input, &mut grads.hidden.weights, &mut grads.hidden.bias);
    affine_input_grad(&d_hidden, &net.hidden.weights)
}
