//! Multi-task anomaly detection for multi-channel driving telemetry.
//!
//! A shared convolutional BiLSTM encoder feeds two heads: a reconstruction
//! decoder and a greedy maneuver-sequence decoder. Reconstruction errors are
//! scored by Mahalanobis distance under a Gaussian fitted on training
//! errors, and optionally divided by the negative log-likelihood of the
//! predicted maneuvers so that rare-but-normal maneuvers rank lower.
//!
//! Module map:
//!
//! - [`numeric`]: arrays, Cholesky, softmax, seeded RNG
//! - [`nn`]: layers with backward passes, losses, Adam, gradient checking
//! - [`model`]: multi-task network, LSTM autoencoder baseline, per-maneuver ensemble, training
//! - [`data`]: traces, CSV, downsampling, windowing, scaling, synthetic generator
//! - [`scoring`]: Gaussian error models, Mahalanobis, scaled scores, percentile reports
//! - [`cli`]: the `synth`/`prepare`/`train`/`score`/`compare` pipeline behind the `mtad` binary

pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod numeric;
pub mod scoring;

pub use error::{Error, Result};
