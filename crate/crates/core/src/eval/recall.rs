use serde::{Deserialize, Serialize};

use super::{EvalError, RecordLabel};

/// Detection counts of one (serving cell, detector) pair at a fixed
/// threshold.
///
/// Recall comes in two flavors: with the static-novelty rule layered on top
/// (a static record counts as detected no matter its score) and score-only
/// on the non-static subset. The achieved false positive rate is score-only
/// exceedance over the records not containing the false PCI. Ratios are
/// `None` when their denominator is empty rather than a misleading zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallStats {
    pub threshold: f64,
    pub n_records: usize,
    pub tp_records: usize,
    pub static_records: usize,
    pub detected_tp: usize,
    pub tp_nonstatic: usize,
    pub detected_tp_nonstatic: usize,
    pub benign_records: usize,
    pub false_positives: usize,
}

impl RecallStats {
    pub fn recall_with_static(&self) -> Option<f64> {
        ratio(self.detected_tp, self.tp_records)
    }

    pub fn recall_without_static(&self) -> Option<f64> {
        ratio(self.detected_tp_nonstatic, self.tp_nonstatic)
    }

    pub fn benign_fpr_achieved(&self) -> Option<f64> {
        ratio(self.false_positives, self.benign_records)
    }

    pub fn missed_tp(&self) -> usize {
        self.tp_records - self.detected_tp
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn recall_report(
    scores: &[f64],
    threshold: f64,
    labels: &[RecordLabel],
) -> Result<RecallStats, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }

    let mut stats = RecallStats {
        threshold,
        n_records: labels.len(),
        tp_records: 0,
        static_records: 0,
        detected_tp: 0,
        tp_nonstatic: 0,
        detected_tp_nonstatic: 0,
        benign_records: 0,
        false_positives: 0,
    };

    for (&score, label) in scores.iter().zip(labels) {
        let exceeds = score > threshold;
        if label.is_static {
            stats.static_records += 1;
        }
        if label.is_tp {
            stats.tp_records += 1;
            if exceeds || label.is_static {
                stats.detected_tp += 1;
            }
            if !label.is_static {
                stats.tp_nonstatic += 1;
                if exceeds {
                    stats.detected_tp_nonstatic += 1;
                }
            }
        } else {
            stats.benign_records += 1;
            if exceeds {
                stats.false_positives += 1;
            }
        }
    }
    Ok(stats)
}
