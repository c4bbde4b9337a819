//! False base station detection workbench.
//!
//! The crate simulates a small LTE-like radio neighborhood with an optional
//! moving false cell, extracts per-serving-cell features from the resulting
//! measurement reports, trains semi-supervised novelty detectors on benign
//! data and evaluates detection recall at a calibrated false positive rate.
//!
//! The numeric kernels are generic over [`scalar::Scalar`] (`f32`/`f64`);
//! the aliases below fix the `f64` instantiations used by the pipeline.

pub mod detect;
pub mod eval;
pub mod features;
pub mod ml;
pub mod pipeline;
pub mod scalar;
pub mod sim;

pub use sim::{Pci, Position};

/// `f64` instantiations used throughout the pipeline.
pub type KMeans = ml::KMeansModel<f64>;
pub type ForestRegressor = ml::RandomForestRegressor<f64>;
pub type Net = ml::DenseNet<f64>;
pub type Adf = detect::AdfModel<f64>;
pub type Autoencoder = detect::AutoencoderModel<f64>;
pub type RegressionClustering = detect::RegressionClusteringModel<f64>;
