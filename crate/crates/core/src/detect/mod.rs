//! Semi-supervised novelty detectors sharing one contract: fit on benign
//! training features, then give every record a real-valued anomaly score
//! (higher means more anomalous).
//!
//! * [`AdfModel`] - an anomaly detection forest whose leaves carry
//!   feature-wise anomaly borders;
//! * [`AutoencoderModel`] - an hourglass reconstruction network scored by
//!   standardized reconstruction error;
//! * [`RegressionClusteringModel`] - per-cell regressors over clustered
//!   targets, with a two-pass flag rule that also names the culprit cell.

mod adf;
mod ae;
mod rc;

pub mod persist;

pub use adf::{AdfModel, AdfParams};
pub use ae::{AutoencoderModel, Standardizer};
pub use rc::{RcParams, RcVerdict, RegressionClusteringModel};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Rc,
    Adf,
    Ae,
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DetectorKind::Rc => write!(f, "rc"),
            DetectorKind::Adf => write!(f, "adf"),
            DetectorKind::Ae => write!(f, "ae"),
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rc" => Ok(DetectorKind::Rc),
            "adf" => Ok(DetectorKind::Adf),
            "ae" => Ok(DetectorKind::Ae),
            other => Err(format!("unknown detector {other:?} (rc|adf|ae)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("empty training matrix")]
    EmptyTrainingData,
    #[error("row has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} feature columns, got {got}")]
    TooFewColumns { needed: usize, got: usize },
    #[error(transparent)]
    Ml(#[from] crate::ml::MlError),
}
