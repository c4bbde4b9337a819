//! Pipeline orchestration: simulate -> extract -> train -> evaluate, with
//! every artifact written under one output directory and reproducible byte
//! for byte from `(config, seeds)`.

mod config;
mod manifest;
mod stages;

pub use config::{
    DetectorSpec, PipelineConfig, RadioSettings, TestPhase, TrainPhase, ValidationPhase,
};
pub use manifest::Manifest;
pub use stages::{
    cmd_evaluate, cmd_extract, cmd_pipeline, cmd_report, cmd_simulate, cmd_train, EvalOutputs,
    FittedDetector, PipelineOutputs,
};

/// Stage failures carry distinct exit codes so scripts can tell a bad config
/// from missing inputs from numerical trouble.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dependency error: {0}")]
    Dependency(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Dependency(_) => 3,
            PipelineError::Numerical(_) => 4,
            PipelineError::Io(_) => 5,
        }
    }
}

impl From<crate::sim::SimError> for PipelineError {
    fn from(e: crate::sim::SimError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<crate::sim::io::IoError> for PipelineError {
    fn from(e: crate::sim::io::IoError) -> Self {
        match e {
            crate::sim::io::IoError::Io(io) => PipelineError::Io(io),
            other => PipelineError::Config(other.to_string()),
        }
    }
}

impl From<crate::features::FeatureError> for PipelineError {
    fn from(e: crate::features::FeatureError) -> Self {
        PipelineError::Numerical(e.to_string())
    }
}

impl From<crate::ml::MlError> for PipelineError {
    fn from(e: crate::ml::MlError) -> Self {
        PipelineError::Numerical(e.to_string())
    }
}

impl From<crate::detect::DetectError> for PipelineError {
    fn from(e: crate::detect::DetectError) -> Self {
        PipelineError::Numerical(e.to_string())
    }
}

impl From<crate::detect::persist::PersistError> for PipelineError {
    fn from(e: crate::detect::persist::PersistError) -> Self {
        match e {
            crate::detect::persist::PersistError::Io(io) => PipelineError::Io(io),
            other => PipelineError::Numerical(other.to_string()),
        }
    }
}

impl From<crate::eval::EvalError> for PipelineError {
    fn from(e: crate::eval::EvalError) -> Self {
        PipelineError::Numerical(e.to_string())
    }
}
