use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::sim::Pci;

/// One scored test record as consumed by the aggregation and timeline
/// exports. `flagged` is the score-only verdict at the serving cell's
/// calibrated threshold; the static rule is kept separate so consumers can
/// layer it per their accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record_id: usize,
    pub time_s: f64,
    pub serving_pci: Pci,
    pub score: f64,
    pub flagged: bool,
    pub is_static: bool,
    pub is_tp: bool,
}

impl ScoredRecord {
    /// Detection verdict with the static-novelty rule layered on top.
    pub fn detected(&self) -> bool {
        self.flagged || self.is_static
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VisibilityBucket {
    /// Number of false-cell positions (time bins) in this bucket.
    pub positions: usize,
    /// How many of them at least one serving cell detected.
    pub detected: usize,
}

impl VisibilityBucket {
    pub fn detection_ratio(&self) -> Option<f64> {
        if self.positions == 0 {
            None
        } else {
            Some(self.detected as f64 / self.positions as f64)
        }
    }
}

/// Per-false-cell detection grouped by how many serving cells saw the false
/// cell at each position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedReport {
    pub false_pci: Pci,
    pub visible_1: VisibilityBucket,
    pub visible_2: VisibilityBucket,
    pub visible_many: VisibilityBucket,
}

impl AggregatedReport {
    pub fn total_positions(&self) -> usize {
        self.visible_1.positions + self.visible_2.positions + self.visible_many.positions
    }

    pub fn total_detected(&self) -> usize {
        self.visible_1.detected + self.visible_2.detected + self.visible_many.detected
    }
}

/// Bucket the false cell's positions by visibility and report the ratio
/// detected by at least one serving cell.
///
/// A position is one `position_bin_s`-wide time bin of the trajectory. Its
/// visibility is the number of serving cells that received at least one
/// report containing the false PCI in that bin (records with `is_tp`), and
/// it counts as detected when any such report was flagged or static. Bins
/// nobody saw are excluded entirely.
pub fn aggregate_false_cell(
    records: &[ScoredRecord],
    false_pci: Pci,
    position_bin_s: f64,
) -> AggregatedReport {
    let mut seen_by: BTreeMap<u64, BTreeSet<Pci>> = BTreeMap::new();
    let mut detected: BTreeMap<u64, bool> = BTreeMap::new();

    for r in records.iter().filter(|r| r.is_tp) {
        let bin = (r.time_s / position_bin_s).floor() as u64;
        seen_by.entry(bin).or_default().insert(r.serving_pci);
        let d = detected.entry(bin).or_default();
        *d = *d || r.detected();
    }

    let mut report = AggregatedReport {
        false_pci,
        visible_1: VisibilityBucket::default(),
        visible_2: VisibilityBucket::default(),
        visible_many: VisibilityBucket::default(),
    };
    for (bin, cells) in &seen_by {
        let bucket = match cells.len() {
            0 => continue,
            1 => &mut report.visible_1,
            2 => &mut report.visible_2,
            _ => &mut report.visible_many,
        };
        bucket.positions += 1;
        if detected[bin] {
            bucket.detected += 1;
        }
    }
    report
}
