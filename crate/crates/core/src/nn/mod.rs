//! Minimal deterministic training engine: dense layers, LSTM cells with
//! per-gate weight views, MSE and softmax-cross-entropy losses, SGD/Adam,
//! and a training loop with a per-step WMM hook.

pub mod activation;
pub mod dense;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod optim;
pub mod train;

pub use activation::Activation;
pub use dense::DenseLayer;
pub use loss::Loss;
pub use lstm::{LstmCell, LstmMatrix};
pub use model::{InitScheme, Model, ModelPreset};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    train, Dataset, RunStatus, Splits, Targets, TrainConfig, TrainReport, WmmEventRecord,
};
