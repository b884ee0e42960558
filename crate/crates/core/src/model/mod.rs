//! Recognition and generation networks.
//!
//! The recognition network maps a datum `x` (width `D`) through one hidden
//! layer to `2K` outputs, read as the center and log-scale of a factorized
//! logistic posterior `q(h | x)`. The generation network maps a latent `h`
//! (width `K`) through one hidden layer to `2D` outputs, read as the mean
//! and log standard deviation of a diagonal Gaussian `p(x | h)`. The prior
//! `p(h)` is a learnable factorized logistic.

mod elbo;
mod gradcheck;

pub use elbo::{
    draw_noise, elbo_estimate, elbo_gradients, elbo_gradients_with_noise, elbo_with_noise,
    ElboBreakdown,
};
pub use gradcheck::{compare_gradients, grad_check, numeric_gradients, BlockReport, GradCheckReport};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::distributions::{clamp_log_scale, GaussianDiag, LogisticDiag};
use crate::error::{Error, Result};
use crate::linalg::{affine_forward, Matrix};
use crate::math;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
    /// Used to build affine decoders in tests and diagnostics.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(a),
            Activation::Softplus => math::softplus(a),
            Activation::Identity => a,
        }
    }

    /// Derivative given the pre-activation `a` and the activation value `y`.
    #[inline]
    fn derivative(self, a: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Softplus => math::sigmoid(a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    /// `out × in`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape("layer bias", weights.rows(), bias.len()));
        }
        Ok(AffineLayer { weights, bias })
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        AffineLayer {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: rng::Rng + ?Sized>(outputs: usize, inputs: usize, rng: &mut R) -> Self {
        let limit = math::sqrt(6.0 / (inputs + outputs) as f64);
        let weights =
            Matrix::from_fn(outputs, inputs, |_, _| limit * (2.0 * rng::open_uniform(rng) - 1.0));
        AffineLayer {
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        affine_forward(x, &self.weights, &self.bias)
    }
}

/// Two affine layers with a nonlinearity in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub hidden: AffineLayer,
    pub output: AffineLayer,
    pub activation: Activation,
}

pub(crate) struct NetworkPass {
    pub pre: Matrix,
    pub post: Matrix,
    pub out: Matrix,
}

impl Network {
    pub(crate) fn pass(&self, x: &Matrix) -> Result<NetworkPass> {
        let pre = self.hidden.forward(x)?;
        let mut post = pre.clone();
        for v in post.as_mut_slice() {
            *v = self.activation.apply(*v);
        }
        let out = self.output.forward(&post)?;
        Ok(NetworkPass { pre, post, out })
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.pass(x)?.out)
    }

    pub(crate) fn activation_derivative(&self, pre: f64, post: f64) -> f64 {
        self.activation.derivative(pre, post)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub data_dim: usize,
    pub latent_dim: usize,
    pub recognition_hidden: usize,
    pub generation_hidden: usize,
    pub recognition_activation: Activation,
    pub generation_activation: Activation,
}

impl Architecture {
    /// Tanh recognition layer and softplus generation layer.
    pub fn new(data_dim: usize, latent_dim: usize, recognition_hidden: usize, generation_hidden: usize) -> Self {
        Architecture {
            data_dim,
            latent_dim,
            recognition_hidden,
            generation_hidden,
            recognition_activation: Activation::Tanh,
            generation_activation: Activation::Softplus,
        }
    }
}

pub const BLOCK_COUNT: usize = 10;

/// Parameter blocks in serialization order.
pub const BLOCK_NAMES: [&str; BLOCK_COUNT] = [
    "recognition.hidden.weights",
    "recognition.hidden.bias",
    "recognition.output.weights",
    "recognition.output.bias",
    "generation.hidden.weights",
    "generation.hidden.bias",
    "generation.output.weights",
    "generation.output.bias",
    "prior.center",
    "prior.log_scale",
];

/// All learnable parameters. Gradients share this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub recognition: Network,
    pub generation: Network,
    pub prior: LogisticDiag,
}

impl ModelParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let (d, k) = (arch.data_dim, arch.latent_dim);
        ModelParams {
            recognition: Network {
                hidden: AffineLayer::zeros(arch.recognition_hidden, d),
                output: AffineLayer::zeros(2 * k, arch.recognition_hidden),
                activation: arch.recognition_activation,
            },
            generation: Network {
                hidden: AffineLayer::zeros(arch.generation_hidden, k),
                output: AffineLayer::zeros(2 * d, arch.generation_hidden),
                activation: arch.generation_activation,
            },
            prior: LogisticDiag::standard(k),
        }
    }

    /// Glorot-uniform weights, zero biases, standard-logistic prior.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let (d, k) = (arch.data_dim, arch.latent_dim);
        let mut r = rng::stream(seed, Stream::Init, 0);
        ModelParams {
            recognition: Network {
                hidden: AffineLayer::glorot(arch.recognition_hidden, d, &mut r),
                output: AffineLayer::glorot(2 * k, arch.recognition_hidden, &mut r),
                activation: arch.recognition_activation,
            },
            generation: Network {
                hidden: AffineLayer::glorot(arch.generation_hidden, k, &mut r),
                output: AffineLayer::glorot(2 * d, arch.generation_hidden, &mut r),
                activation: arch.generation_activation,
            },
            prior: LogisticDiag::standard(k),
        }
    }

    pub fn data_dim(&self) -> usize {
        self.recognition.hidden.inputs()
    }

    pub fn latent_dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            data_dim: self.data_dim(),
            latent_dim: self.latent_dim(),
            recognition_hidden: self.recognition.hidden.outputs(),
            generation_hidden: self.generation.hidden.outputs(),
            recognition_activation: self.recognition.activation,
            generation_activation: self.generation.activation,
        }
    }

    /// Checks every cross-network dimension.
    pub fn validate(&self) -> Result<()> {
        let d = self.data_dim();
        let k = self.latent_dim();
        let r = &self.recognition;
        let g = &self.generation;
        let checks: [(&'static str, usize, usize); 8] = [
            ("prior log_scale", k, self.prior.log_scale.len()),
            ("recognition hidden bias", r.hidden.outputs(), r.hidden.bias.len()),
            ("recognition output input width", r.hidden.outputs(), r.output.inputs()),
            ("recognition output width", 2 * k, r.output.outputs()),
            ("generation input width", k, g.hidden.inputs()),
            ("generation output input width", g.hidden.outputs(), g.output.inputs()),
            ("generation output width", 2 * d, g.output.outputs()),
            ("generation output bias", 2 * d, g.output.bias.len()),
        ];
        for (ctx, expected, found) in checks {
            if expected != found {
                return Err(Error::shape(ctx, expected, found));
            }
        }
        if r.output.bias.len() != r.output.outputs() || g.hidden.bias.len() != g.hidden.outputs() {
            return Err(Error::argument("bias length disagrees with weight rows"));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(&self.architecture())
    }

    pub fn blocks(&self) -> [&[f64]; BLOCK_COUNT] {
        [
            self.recognition.hidden.weights.as_slice(),
            &self.recognition.hidden.bias,
            self.recognition.output.weights.as_slice(),
            &self.recognition.output.bias,
            self.generation.hidden.weights.as_slice(),
            &self.generation.hidden.bias,
            self.generation.output.weights.as_slice(),
            &self.generation.output.bias,
            &self.prior.center,
            &self.prior.log_scale,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; BLOCK_COUNT] {
        [
            self.recognition.hidden.weights.as_mut_slice(),
            &mut self.recognition.hidden.bias,
            self.recognition.output.weights.as_mut_slice(),
            &mut self.recognition.output.bias,
            self.generation.hidden.weights.as_mut_slice(),
            &mut self.generation.hidden.bias,
            self.generation.output.weights.as_mut_slice(),
            &mut self.generation.output.bias,
            &mut self.prior.center,
            &mut self.prior.log_scale,
        ]
    }

    /// `(rows, cols)` of every block; vectors report one column.
    pub fn block_shapes(&self) -> [(usize, usize); BLOCK_COUNT] {
        let r = &self.recognition;
        let g = &self.generation;
        let w = |m: &Matrix| (m.rows(), m.cols());
        [
            w(&r.hidden.weights),
            (r.hidden.bias.len(), 1),
            w(&r.output.weights),
            (r.output.bias.len(), 1),
            w(&g.hidden.weights),
            (g.hidden.bias.len(), 1),
            w(&g.output.weights),
            (g.output.bias.len(), 1),
            (self.prior.center.len(), 1),
            (self.prior.log_scale.len(), 1),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

/// Posterior parameters for a batch: row `n` belongs to datum `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticBatch {
    pub center: Matrix,
    pub log_scale: Matrix,
}

impl LogisticBatch {
    pub fn len(&self) -> usize {
        self.center.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, n: usize) -> LogisticDiag {
        LogisticDiag {
            center: self.center.row(n).to_vec(),
            log_scale: self.log_scale.row(n).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBatch {
    pub mean: Matrix,
    pub log_sigma: Matrix,
}

impl GaussianBatch {
    pub fn len(&self) -> usize {
        self.mean.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, n: usize) -> GaussianDiag {
        GaussianDiag {
            mean: self.mean.row(n).to_vec(),
            log_sigma: self.log_sigma.row(n).to_vec(),
        }
    }
}

/// Splits `2W` network outputs into a location block and a clamped log-scale block.
fn split_location_scale(out: &Matrix) -> (Matrix, Matrix) {
    let w = out.cols() / 2;
    let loc = out.column_block(0, w);
    let mut scale = out.column_block(w, 2 * w);
    for v in scale.as_mut_slice() {
        *v = clamp_log_scale(*v);
    }
    (loc, scale)
}

/// `(μ_h, log s_h) = f(x; Ψ)` for every row of `x`.
pub fn recognize(params: &ModelParams, x: &Matrix) -> Result<LogisticBatch> {
    if x.cols() != params.data_dim() {
        return Err(Error::shape("recognize input width", params.data_dim(), x.cols()));
    }
    let out = params.recognition.forward(x)?;
    let (center, log_scale) = split_location_scale(&out);
    Ok(LogisticBatch { center, log_scale })
}

pub fn recognize_one(params: &ModelParams, x: &[f64]) -> Result<LogisticDiag> {
    let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(recognize(params, &m)?.row(0))
}

/// `(μ_x, log σ_x) = g(h; Θ)` for every row of `h`.
pub fn generate(params: &ModelParams, h: &Matrix) -> Result<GaussianBatch> {
    if h.cols() != params.latent_dim() {
        return Err(Error::shape("generate input width", params.latent_dim(), h.cols()));
    }
    let out = params.generation.forward(h)?;
    let (mean, log_sigma) = split_location_scale(&out);
    Ok(GaussianBatch { mean, log_sigma })
}

pub fn generate_one(params: &ModelParams, h: &[f64]) -> Result<GaussianDiag> {
    let m = Matrix::from_vec(1, h.len(), h.to_vec())?;
    Ok(generate(params, &m)?.row(0))
}
