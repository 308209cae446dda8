//! Semi-supervised Wasserstein InfoGAN for variable-length skeleton motion.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`data`]: NTU `.skeleton` ingestion, preprocessing, cross-subject splits,
//!   label masking, a synthetic stick-figure fixture and the canonical
//!   dataset file.
//! - [`priors`]: the global latent seed (categorical code, uniform noise,
//!   sequence length).
//! - [`nets`]: the autoregressive GRU generator, the convolutional trunk
//!   shared by critic and encoder, and spectral normalization.
//! - [`training`]: Wasserstein/InfoGAN losses, the alternating update loop,
//!   the gradient-penalty alternative, metrics and checkpoints.
//! - [`baselines`]: directly supervised CNN and GRU classifiers.
//! - [`eval`]: accuracies, confusion matrices, code-to-class matching and
//!   exports (sequence dumps, skeleton figures, training curves).
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod nets;
pub mod priors;
pub mod training;

pub use error::{Error, Result};
