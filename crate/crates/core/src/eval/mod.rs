//! Threshold calibration, ground-truth labeling and the report computations
//! behind the per-serving-cell recall table and the per-false-cell
//! aggregation by visibility.

mod aggregate;
mod calibrate;
mod labels;
mod recall;
mod timeline;

pub mod io;

pub use aggregate::{aggregate_false_cell, AggregatedReport, ScoredRecord, VisibilityBucket};
pub use calibrate::calibrate_threshold;
pub use labels::{label_records, RecordLabel};
pub use recall::{recall_report, RecallStats};
pub use timeline::{export_timeline, TimelineRow};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty score set")]
    EmptyScores,
    #[error("target rate {0} outside [0, 1]")]
    InvalidTarget(f64),
    #[error("scores and labels differ in length: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
}
