use serde::{Deserialize, Serialize};

use crate::features::{flag_static, NeighborCatalog, ReportRecord};
use crate::sim::Pci;

/// Ground truth of one scored record: whether the false PCI shows up among
/// its neighbors (a true positive for detection purposes) and whether the
/// static-novelty rule fires on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordLabel {
    pub record_id: usize,
    pub is_tp: bool,
    pub is_static: bool,
}

pub fn label_records(
    records: &[ReportRecord],
    false_pci: Option<Pci>,
    catalog: &NeighborCatalog,
) -> Vec<RecordLabel> {
    records
        .iter()
        .map(|r| RecordLabel {
            record_id: r.record_id,
            is_tp: false_pci
                .map(|pci| r.neighbor_list.iter().any(|&(p, _)| p == pci))
                .unwrap_or(false),
            is_static: flag_static(r, catalog),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::fit_neighbor_catalog;
    use crate::sim::{build_topology, GridConfig};

    fn record(id: usize, serving: u32, neighbors: &[u32]) -> ReportRecord {
        ReportRecord {
            record_id: id,
            time_s: id as f64,
            serving_pci: Pci(serving),
            serving_rsrp_dbm: -80.0,
            neighbor_list: neighbors.iter().map(|&p| (Pci(p), -95.0)).collect(),
        }
    }

    fn catalog_from(serving: u32, training_neighbors: &[u32]) -> NeighborCatalog {
        let topology = build_topology(&GridConfig::default());
        let training = vec![record(0, serving, training_neighbors)];
        fit_neighbor_catalog(Pci(serving), &training, &topology).unwrap()
    }

    #[test]
    fn false_pci_presence_sets_tp_and_catalog_sets_static() {
        let catalog = catalog_from(8, &[5, 7, 9]);
        let labels = label_records(
            &[record(0, 8, &[5, 7]), record(1, 8, &[7]), record(2, 8, &[7, 11])],
            Some(Pci(5)),
            &catalog,
        );
        assert_eq!(labels[0], RecordLabel { record_id: 0, is_tp: true, is_static: false });
        assert_eq!(labels[1], RecordLabel { record_id: 1, is_tp: false, is_static: false });
        // PCI 11 was never seen in training.
        assert_eq!(labels[2], RecordLabel { record_id: 2, is_tp: false, is_static: true });
    }

    #[test]
    fn tp_and_static_can_coincide_for_an_uncataloged_false_pci() {
        let catalog = catalog_from(1, &[2, 4]);
        let labels = label_records(&[record(0, 1, &[2, 12])], Some(Pci(12)), &catalog);
        assert!(labels[0].is_tp && labels[0].is_static);
    }

    #[test]
    fn benign_runs_have_no_tp_labels() {
        let catalog = catalog_from(1, &[2, 4]);
        let labels = label_records(&[record(0, 1, &[2, 4])], None, &catalog);
        assert!(!labels[0].is_tp);
    }
}
