//! Adversarial training for probabilistic spiking generators.
//!
//! The library pairs a stochastic spiking network generator (GLM neurons,
//! trained with a local three-factor REINFORCE rule) with a conventional
//! dense or 1-D convolutional discriminator trained by manual backprop.
//! On top of the plain adversarial loop it provides a Bayesian variant
//! (a particle ensemble updated by Stein variational gradient descent),
//! a continual meta-learning variant (Reptile initialization learning for
//! both networks), and a maximum-likelihood baseline, together with
//! evaluation tooling (TSTR/TRTS classifier accuracies, PCA projections,
//! spike-mode coverage) and a reproducible experiment runner.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release -p spikegan --example temporal_gan
//! cargo run --release -p spikegan --example temporal_bayes
//! cargo run --release -p spikegan --example digits_gan
//! cargo run --release -p spikegan --example meta_continual
//! cargo run --release -p spikegan --example gradcheck
//! ```

pub mod codec;
pub mod config;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod meta;
pub mod plot;
pub mod snn;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use snn::SpikeTrain;
