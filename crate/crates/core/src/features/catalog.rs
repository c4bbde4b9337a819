use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::sim::{CellSite, Pci, Position};

use super::{FeatureError, ReportRecord};

/// What a serving cell learned about its neighborhood during training: the
/// set of neighbor PCIs it ever saw, the legitimate cell positions and the
/// largest concurrent neighbor count. Cell positions always come from the
/// legitimate topology, never from a transmitter's actual location, which is
/// what makes a moved false cell stand out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborCatalog {
    pub serving_pci: Pci,
    pub serving_position: Position,
    pub known_neighbors: BTreeSet<Pci>,
    /// Keyed maps serialize as entry lists so the catalog stays plain TOML.
    #[serde(with = "position_entries")]
    pub neighbor_positions: BTreeMap<Pci, Position>,
    pub max_concurrent_neighbors: usize,
}

mod position_entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        pci: Pci,
        x_m: f64,
        y_m: f64,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<Pci, Position>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map
            .iter()
            .map(|(&pci, p)| Entry {
                pci,
                x_m: p.x,
                y_m: p.y,
            })
            .collect();
        serde::Serialize::serialize(&entries, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<Pci, Position>, D::Error> {
        let entries: Vec<Entry> = serde::Deserialize::deserialize(d)?;
        Ok(entries
            .into_iter()
            .map(|e| (e.pci, Position::new(e.x_m, e.y_m)))
            .collect())
    }
}

/// Fit the catalog of one serving cell from its training records.
pub fn fit_neighbor_catalog(
    serving_pci: Pci,
    records: &[ReportRecord],
    topology: &[CellSite],
) -> Result<NeighborCatalog, FeatureError> {
    let positions: BTreeMap<Pci, Position> =
        topology.iter().map(|c| (c.pci, c.position)).collect();
    let serving_position = *positions
        .get(&serving_pci)
        .ok_or(FeatureError::UnknownPci(serving_pci))?;

    let mut known_neighbors = BTreeSet::new();
    let mut max_concurrent_neighbors = 0;
    for record in records {
        if record.serving_pci != serving_pci {
            return Err(FeatureError::MixedServingCells {
                expected: serving_pci,
                found: record.serving_pci,
            });
        }
        max_concurrent_neighbors = max_concurrent_neighbors.max(record.neighbor_list.len());
        for &(pci, _) in &record.neighbor_list {
            if !positions.contains_key(&pci) {
                return Err(FeatureError::UnknownPci(pci));
            }
            known_neighbors.insert(pci);
        }
    }

    Ok(NeighborCatalog {
        serving_pci,
        serving_position,
        known_neighbors,
        neighbor_positions: positions,
        max_concurrent_neighbors,
    })
}

/// Static novelty rule: a record is suspicious when it names a neighbor PCI
/// the serving cell never saw during training.
pub fn flag_static(record: &ReportRecord, catalog: &NeighborCatalog) -> bool {
    record
        .neighbor_list
        .iter()
        .any(|(pci, _)| !catalog.known_neighbors.contains(pci))
}
