use std::collections::BTreeMap;

use crate::sim::{MeasurementReport, Pci};

use super::ReportRecord;

/// Split a raw log into per-serving-cell records. Reports without neighbors
/// cannot carry false base station evidence and are dropped; the remaining
/// records keep their raw log index as `record_id`.
pub fn preprocess(log: &[MeasurementReport]) -> BTreeMap<Pci, Vec<ReportRecord>> {
    let mut by_serving: BTreeMap<Pci, Vec<ReportRecord>> = BTreeMap::new();
    for (record_id, report) in log.iter().enumerate() {
        if report.neighbors.is_empty() {
            continue;
        }
        by_serving
            .entry(report.serving_pci)
            .or_default()
            .push(ReportRecord {
                record_id,
                time_s: report.time_s,
                serving_pci: report.serving_pci,
                serving_rsrp_dbm: report.serving_rsrp_dbm,
                neighbor_list: report
                    .neighbors
                    .iter()
                    .map(|n| (n.pci, n.rsrp_dbm))
                    .collect(),
            });
    }
    by_serving
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NeighborMeasurement;

    fn report(serving: u32, neighbors: &[u32]) -> MeasurementReport {
        MeasurementReport {
            time_s: 0.0,
            ue_id: 0,
            serving_pci: Pci(serving),
            serving_rsrp_dbm: -80.0,
            serving_rsrq_db: -5.0,
            neighbors: neighbors
                .iter()
                .map(|&pci| NeighborMeasurement {
                    pci: Pci(pci),
                    rsrp_dbm: -95.0,
                    rsrq_db: -12.0,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_neighbor_reports_are_dropped() {
        let log = vec![report(8, &[2, 3]), report(8, &[]), report(8, &[5])];
        let split = preprocess(&log);
        assert_eq!(split[&Pci(8)].len(), 2);
        // record_id preserves raw log order across the dropped report
        assert_eq!(split[&Pci(8)][0].record_id, 0);
        assert_eq!(split[&Pci(8)][1].record_id, 2);
    }

    #[test]
    fn shared_serving_cell_yields_one_key() {
        let log = vec![report(8, &[1]), report(8, &[2]), report(8, &[3])];
        let split = preprocess(&log);
        assert_eq!(split.len(), 1);
        assert!(split.contains_key(&Pci(8)));
    }

    #[test]
    fn rsrq_is_dropped_and_rsrp_kept() {
        let split = preprocess(&[report(1, &[9])]);
        let rec = &split[&Pci(1)][0];
        assert_eq!(rec.neighbor_list, vec![(Pci(9), -95.0)]);
        assert_eq!(rec.serving_rsrp_dbm, -80.0);
    }
}
