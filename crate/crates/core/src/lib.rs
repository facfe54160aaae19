//! Stochastic weight-matrix regularization lab.
//!
//! Two operators perturb weight matrices directly during training:
//! weight reinitialization (WMM-R) resets a sparse, windowed subset of the
//! entries to fresh draws from the initialization distribution, and weight
//! shuffling (WMM-S) permutes a Bernoulli-masked subset inside a rectangular
//! window, preserving the value multiset. Around them sits a minimal,
//! fully seeded training engine (dense + LSTM layers with manual
//! backpropagation), entropy/KL instrumentation, synthetic time-series
//! generation, an MNIST IDX parser, and a log-uniform random-search harness.

pub mod data;
pub mod error;
pub mod hyperopt;
pub mod nn;
pub mod rng;
pub mod stats;
pub mod wmm;

pub use error::{Error, Result};
pub use rng::RngState;
