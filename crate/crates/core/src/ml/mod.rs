//! Self-contained numeric kernels: Lloyd k-means with k-means++ seeding,
//! a CART-style random forest regressor, and a dense feedforward network
//! trained with Adam on mean-square reconstruction error.
//!
//! Everything is a deterministic function of `(data, hyperparameters, seed)`.

mod forest;
mod kmeans;
mod net;

pub use forest::{ForestParams, RandomForestRegressor};
pub use kmeans::KMeansModel;
pub use net::{adam_train, grad_check, Activation, AdamTrainConfig, DenseNet, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum MlError {
    #[error("empty training data")]
    EmptyInput,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}; inputs are likely unscaled or degenerate")]
    NonFiniteLoss { epoch: usize },
}
