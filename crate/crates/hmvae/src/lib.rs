//! File formats, reports, images and the command-line pipeline around
//! [`hmvae_core`].
//!
//! | module      | contents                                          |
//! |-------------|---------------------------------------------------|
//! | [`formats`] | VMAT subject matrices and model checkpoints       |
//! | [`report`]  | CSV tables                                        |
//! | [`image`]   | PPM montages of projection maps                   |
//! | [`config`]  | JSON run configuration                            |
//! | [`cli`]     | subcommand dispatch                               |

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod fsutil;
pub mod image;
pub mod report;

pub use error::{Error, Result};
pub use hmvae_core as core;
