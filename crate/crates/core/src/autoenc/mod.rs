//! Conv-augmented autoencoder regressor and expected-gradients attribution.

pub mod explain;
pub mod net;
pub mod train;

use thiserror::Error;

pub use explain::{attribution_scores, expected_gradients, EG_CHUNK};
pub use net::{backward, forward, input_gradient, l1_loss, rescale_features, Activation, Cache, Dims, NetParams, Tensors};
pub use train::{train, train_from, write_log_csv, LogRow, Optimizer, TrainConfig, TrainOutcome, TrainingPair};

#[derive(Debug, Error)]
pub enum AutoencError {
    #[error("invalid network dimensions {0:?}: need 0 < d2 <= d1 <= n")]
    InvalidDims(Dims),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cache was produced by different parameters")]
    StaleCache,
    #[error("no training pairs")]
    EmptyTrainingSet,
    #[error("no pair targets the validation year {0}")]
    MissingValidationPair(i32),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("parameters became non-finite in epoch {0}")]
    NonFinite(usize),
    #[error("baseline set is empty")]
    EmptyBaseline,
    #[error("n_samples must be at least 1")]
    NoSamples,
}
