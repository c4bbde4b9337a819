use super::propagation::rsrq_of;
use super::{CellSite, Pci, PropagationParams, UeState};

/// Pick the serving cell for a phone.
///
/// Initial attachment goes to the serving-capable cell with the best RSRQ.
/// Afterwards a handover happens only if some serving-capable neighbor beats
/// the current serving RSRQ by `hysteresis_db`, a reduced form of the
/// A2-A4-RSRQ handover logic. Ties break toward the lowest PCI; cells with
/// `can_serve == false` are never selected.
pub fn update_serving(
    ue: &UeState,
    cells: &[CellSite],
    prop: &PropagationParams,
    hysteresis_db: f64,
) -> Pci {
    let best = |exclude: Option<Pci>| -> Option<(Pci, f64)> {
        let mut choice: Option<(Pci, f64)> = None;
        for cell in cells.iter().filter(|c| c.can_serve) {
            if Some(cell.pci) == exclude {
                continue;
            }
            let q = rsrq_of(cell, ue, cells, prop);
            let better = match choice {
                None => true,
                Some((pci, q_best)) => q > q_best || (q == q_best && cell.pci < pci),
            };
            if better {
                choice = Some((cell.pci, q));
            }
        }
        choice
    };

    let attach = || best(None).expect("at least one serving-capable cell").0;

    let serving = match ue.serving_pci {
        Some(pci) => match cells.iter().find(|c| c.pci == pci && c.can_serve) {
            Some(cell) => cell,
            // Serving cell vanished from the topology; reattach.
            None => return attach(),
        },
        None => return attach(),
    };

    let serving_q = rsrq_of(serving, ue, cells, prop);
    match best(Some(serving.pci)) {
        Some((candidate, candidate_q)) if candidate_q > serving_q + hysteresis_db => candidate,
        _ => serving.pci,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Position;

    fn cell(pci: u32, x: f64, y: f64, can_serve: bool) -> CellSite {
        CellSite {
            pci: Pci(pci),
            position: Position::new(x, y),
            height_m: 25.0,
            tx_power_dbm: 30.0,
            can_serve,
        }
    }

    fn ue_at(x: f64, y: f64, serving: Option<u32>) -> UeState {
        UeState {
            ue_id: 0,
            position: Position::new(x, y),
            height_m: 1.5,
            heading: 0.0,
            serving_pci: serving.map(Pci),
        }
    }

    #[test]
    fn single_capable_cell_always_serves() {
        let prop = PropagationParams::default();
        let cells = vec![cell(3, 0.0, 0.0, true), cell(9, 100.0, 0.0, false)];
        for x in [-50.0, 0.0, 90.0, 120.0] {
            assert_eq!(update_serving(&ue_at(x, 0.0, None), &cells, &prop, 1.0), Pci(3));
            assert_eq!(
                update_serving(&ue_at(x, 0.0, Some(3)), &cells, &prop, 1.0),
                Pci(3)
            );
        }
    }

    #[test]
    fn infinite_hysteresis_pins_the_attachment() {
        let prop = PropagationParams::default();
        let cells = vec![cell(1, 0.0, 0.0, true), cell(2, 1000.0, 0.0, true)];
        // Attached to 1 but standing next to 2.
        let ue = ue_at(990.0, 0.0, Some(1));
        assert_eq!(update_serving(&ue, &cells, &prop, f64::INFINITY), Pci(1));
        // With zero hysteresis it hands over.
        assert_eq!(update_serving(&ue, &cells, &prop, 0.0), Pci(2));
    }

    #[test]
    fn midway_tie_breaks_to_the_lower_pci() {
        let prop = PropagationParams::default();
        let cells = vec![cell(7, 0.0, 0.0, true), cell(4, 1000.0, 0.0, true)];
        // Exactly halfway between two identical cells: both RSRQ are equal by
        // symmetry, so the attachment must go to PCI 4.
        let ue = ue_at(500.0, 0.0, None);
        assert_eq!(update_serving(&ue, &cells, &prop, 0.0), Pci(4));
    }

    #[test]
    fn decommissioned_cell_is_never_selected() {
        let prop = PropagationParams::default();
        let cells = vec![cell(1, 0.0, 0.0, false), cell(2, 1000.0, 0.0, true)];
        let ue = ue_at(10.0, 0.0, None);
        assert_eq!(update_serving(&ue, &cells, &prop, 0.0), Pci(2));
    }
}
