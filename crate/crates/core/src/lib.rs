//! Numerics for a variational autoencoder with factorized logistic latent
//! variables, trained by reparameterized stochastic variational inference,
//! plus the downstream feature-analysis pipeline.
//!
//! The crate is `no_std` (it needs `alloc`). All transcendental functions go
//! through [`libm`], so results are bit-identical across platforms for a
//! given seed. File formats, reports and the command line live in the
//! companion `hmvae` crate.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`distributions`] | logistic / Gaussian log-densities, entropy, reparameterized sampler |
//! | [`model`] | recognition and generation networks, ELBO estimate and its gradients |
//! | [`optim`] | RMSprop, minibatch training loop, checkpoint contents |
//! | [`data`] | subject-by-voxel matrices, quality control, standardization, synthetic data |
//! | [`analysis`] | projections, marginals, classification, t-tests, correlation, communities |
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analysis;
pub mod data;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod math;
pub mod model;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::Matrix;
