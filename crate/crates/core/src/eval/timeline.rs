use serde::{Deserialize, Serialize};

use crate::sim::Pci;

use super::ScoredRecord;

/// Plot-ready score timeline row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub time_s: f64,
    pub serving_pci: Pci,
    pub score: f64,
    pub contains_false_pci: bool,
}

/// Score-vs-time rows ordered by time (record order breaking ties).
pub fn export_timeline(records: &[ScoredRecord]) -> Vec<TimelineRow> {
    let mut rows: Vec<(usize, TimelineRow)> = records
        .iter()
        .map(|r| {
            (
                r.record_id,
                TimelineRow {
                    time_s: r.time_s,
                    serving_pci: r.serving_pci,
                    score: r.score,
                    contains_false_pci: r.is_tp,
                },
            )
        })
        .collect();
    rows.sort_by(|a, b| a.1.time_s.partial_cmp(&b.1.time_s).unwrap().then(a.0.cmp(&b.0)));
    rows.into_iter().map(|(_, row)| row).collect()
}
