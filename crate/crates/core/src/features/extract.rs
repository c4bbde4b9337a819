use crate::sim::Pci;

use super::{FeatureMatrix, NeighborCatalog, ReportRecord};

/// Neighbors of one record with their geometry resolved against the
/// legitimate topology, in slot order: strongest RSRP first, distance and
/// PCI breaking ties. Neighbors without a topology entry cannot fill a
/// geometry slot (they are still counted by `n_neighbors` and handled by the
/// static-novelty rule).
fn slot_ordered_neighbors(
    record: &ReportRecord,
    catalog: &NeighborCatalog,
) -> Vec<(Pci, f64, f64, f64)> {
    let mut slots: Vec<(Pci, f64, f64, f64)> = record
        .neighbor_list
        .iter()
        .filter_map(|&(pci, rsrp)| {
            catalog.neighbor_positions.get(&pci).map(|pos| {
                (
                    pci,
                    rsrp,
                    pos.x - catalog.serving_position.x,
                    pos.y - catalog.serving_position.y,
                )
            })
        })
        .collect();
    slots.sort_by(|a, b| {
        let dist_a = a.2.hypot(a.3);
        let dist_b = b.2.hypot(b.3);
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(dist_a.partial_cmp(&dist_b).unwrap())
            .then(a.0.cmp(&b.0))
    });
    slots
}

fn shared_prefix(record: &ReportRecord) -> [Option<f64>; 2] {
    [
        Some(record.serving_rsrp_dbm),
        Some(record.neighbor_list.len() as f64),
    ]
}

/// COL scheme: one fixed column per cataloged neighbor PCI, ascending PCI
/// order. Neighbors outside the catalog contribute no column.
pub fn extract_col(records: &[ReportRecord], catalog: &NeighborCatalog) -> FeatureMatrix {
    let pcis: Vec<Pci> = catalog.known_neighbors.iter().copied().collect();
    let mut names = vec!["serving_rsrp".into(), "n_neighbors".into()];
    names.extend(pcis.iter().map(|p| format!("rsrp_pci{p}")));

    let mut matrix = FeatureMatrix::with_columns(names);
    for record in records {
        let mut row: Vec<Option<f64>> = shared_prefix(record).to_vec();
        for pci in &pcis {
            row.push(
                record
                    .neighbor_list
                    .iter()
                    .find(|(p, _)| p == pci)
                    .map(|&(_, rsrp)| rsrp),
            );
        }
        matrix.push_row(&row);
    }
    matrix
}

/// DST scheme: per neighbor slot, the RSRP and the ground distance between
/// the neighbor's legitimate site and the serving cell.
pub fn extract_dst(records: &[ReportRecord], catalog: &NeighborCatalog) -> FeatureMatrix {
    let slots = catalog.max_concurrent_neighbors;
    let mut names = vec!["serving_rsrp".into(), "n_neighbors".into()];
    for i in 1..=slots {
        names.push(format!("nbr{i}_rsrp"));
        names.push(format!("nbr{i}_dist_m"));
    }

    let mut matrix = FeatureMatrix::with_columns(names);
    for record in records {
        let ordered = slot_ordered_neighbors(record, catalog);
        let mut row: Vec<Option<f64>> = shared_prefix(record).to_vec();
        for i in 0..slots {
            match ordered.get(i) {
                Some(&(_, rsrp, dx, dy)) => {
                    row.push(Some(rsrp));
                    row.push(Some(dx.hypot(dy)));
                }
                None => {
                    row.push(None);
                    row.push(None);
                }
            }
        }
        matrix.push_row(&row);
    }
    matrix
}

/// XY scheme: per neighbor slot, the RSRP and the neighbor coordinates
/// relative to the serving cell.
pub fn extract_xy(records: &[ReportRecord], catalog: &NeighborCatalog) -> FeatureMatrix {
    let slots = catalog.max_concurrent_neighbors;
    let mut names = vec!["serving_rsrp".into(), "n_neighbors".into()];
    for i in 1..=slots {
        names.push(format!("nbr{i}_rsrp"));
        names.push(format!("nbr{i}_dx_m"));
        names.push(format!("nbr{i}_dy_m"));
    }

    let mut matrix = FeatureMatrix::with_columns(names);
    for record in records {
        let ordered = slot_ordered_neighbors(record, catalog);
        let mut row: Vec<Option<f64>> = shared_prefix(record).to_vec();
        for i in 0..slots {
            match ordered.get(i) {
                Some(&(_, rsrp, dx, dy)) => {
                    row.push(Some(rsrp));
                    row.push(Some(dx));
                    row.push(Some(dy));
                }
                None => {
                    row.push(None);
                    row.push(None);
                    row.push(None);
                }
            }
        }
        matrix.push_row(&row);
    }
    matrix
}
