use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::propagation::{rsrp_of, rsrq_from_measurements};
use super::serving::update_serving;
use super::{
    CellSite, GridConfig, MeasurementReport, NeighborMeasurement, Pci, Position, PropagationParams,
    SimConfig, SimError, UeState,
};

/// Movement script of the attacker's cell: dwell at the decommissioned
/// site, then jump to the first waypoint and traverse the polyline at
/// constant speed, then stay at the final waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseCellScript {
    pub pci: Pci,
    pub start_position: Position,
    pub dwell_s: f64,
    pub height_m: f64,
    pub waypoints: Vec<Position>,
    pub travel_s: f64,
}

impl FalseCellScript {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.dwell_s < 0.0 {
            return Err(SimError::Config("dwell_s must be non-negative".into()));
        }
        if self.waypoints.is_empty() && self.travel_s > 0.0 {
            return Err(SimError::Config(
                "travel_s > 0 requires at least one waypoint".into(),
            ));
        }
        if !self.waypoints.is_empty() && self.travel_s <= 0.0 {
            return Err(SimError::Config(
                "waypoints given but travel_s is not positive".into(),
            ));
        }
        if self.height_m <= 0.0 {
            return Err(SimError::Config("false cell height must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    Benign,
    Attack {
        decommissioned_pci: Pci,
        script: FalseCellScript,
    },
}

impl Scenario {
    pub fn false_pci(&self) -> Option<Pci> {
        match self {
            Scenario::Benign => None,
            Scenario::Attack { script, .. } => Some(script.pci),
        }
    }
}

/// Row-first grid of identical cells with PCIs 1..=n.
pub fn build_topology(grid: &GridConfig) -> Vec<CellSite> {
    (0..grid.n_cells)
        .map(|i| {
            let row = i / grid.grid_width;
            let col = i % grid.grid_width;
            CellSite {
                pci: Pci(i + 1),
                position: Position::new(col as f64 * grid.delta_x_m, row as f64 * grid.delta_y_m),
                height_m: grid.cell_height_m,
                tx_power_dbm: grid.tx_power_dbm,
                can_serve: true,
            }
        })
        .collect()
}

/// Position of the scripted cell at time `t_s`. The transition from the
/// dwell point to the first waypoint is a jump.
pub fn false_cell_position(script: &FalseCellScript, t_s: f64) -> Position {
    if t_s < script.dwell_s || script.waypoints.is_empty() {
        return script.start_position;
    }
    let travel_t = t_s - script.dwell_s;
    let last = *script.waypoints.last().unwrap();
    if travel_t >= script.travel_s {
        return last;
    }

    let lengths: Vec<f64> = script
        .waypoints
        .windows(2)
        .map(|w| w[0].distance(&w[1]))
        .collect();
    let total: f64 = lengths.iter().sum();
    if total == 0.0 {
        return script.waypoints[0];
    }

    let mut remaining = total * travel_t / script.travel_s;
    for (segment, len) in script.waypoints.windows(2).zip(&lengths) {
        if remaining <= *len {
            let frac = if *len > 0.0 { remaining / len } else { 0.0 };
            return Position::new(
                segment[0].x + frac * (segment[1].x - segment[0].x),
                segment[0].y + frac * (segment[1].y - segment[0].y),
            );
        }
        remaining -= len;
    }
    last
}

struct SnapshotEntry {
    pci: Pci,
    rsrp_dbm: f64,
    rsrq_db: f64,
}

/// Per-cell measurements for one phone, optionally perturbed by log-normal
/// shadowing before RSRQ is derived.
fn measure(
    ue: &UeState,
    cells: &[CellSite],
    prop: &PropagationParams,
    shadow_rng: Option<&mut ChaCha8Rng>,
) -> Vec<SnapshotEntry> {
    let mut rsrp: Vec<f64> = cells.iter().map(|c| rsrp_of(c, ue, prop)).collect();
    if let Some(rng) = shadow_rng {
        if prop.shadowing_sigma_db > 0.0 {
            for v in &mut rsrp {
                // Box-Muller on two uniform draws keeps the dependency
                // surface small.
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let normal =
                    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                *v += prop.shadowing_sigma_db * normal;
            }
        }
    }
    cells
        .iter()
        .zip(&rsrp)
        .map(|(c, &p)| SnapshotEntry {
            pci: c.pci,
            rsrp_dbm: p,
            rsrq_db: rsrq_from_measurements(p, &rsrp, prop),
        })
        .collect()
}

fn report_from_snapshot(
    ue: &UeState,
    time_s: f64,
    snapshot: &[SnapshotEntry],
    config: &SimConfig,
) -> MeasurementReport {
    let serving_pci = ue.serving_pci.expect("phone must be attached");
    let serving = snapshot
        .iter()
        .find(|e| e.pci == serving_pci)
        .expect("serving cell transmits");

    let mut neighbors: Vec<NeighborMeasurement> = snapshot
        .iter()
        .filter(|e| e.pci != serving_pci && e.rsrp_dbm >= config.neighbor_detect_threshold_dbm)
        .map(|e| NeighborMeasurement {
            pci: e.pci,
            rsrp_dbm: e.rsrp_dbm,
            rsrq_db: e.rsrq_db,
        })
        .collect();
    neighbors.sort_by(|a, b| {
        b.rsrp_dbm
            .partial_cmp(&a.rsrp_dbm)
            .unwrap()
            .then(a.pci.cmp(&b.pci))
    });
    neighbors.truncate(config.max_neighbors_per_report);

    MeasurementReport {
        time_s,
        ue_id: ue.ue_id,
        serving_pci,
        serving_rsrp_dbm: serving.rsrp_dbm,
        serving_rsrq_db: serving.rsrq_db,
        neighbors,
    }
}

/// Build the measurement report of one attached phone: all transmitting
/// cells other than the serving one that clear the detection threshold,
/// strongest first, truncated to `max_neighbors_per_report`.
pub fn emit_report(
    ue: &UeState,
    cells: &[CellSite],
    prop: &PropagationParams,
    config: &SimConfig,
) -> MeasurementReport {
    report_from_snapshot(ue, 0.0, &measure(ue, cells, prop, None), config)
}

/// Cells transmitting at time `t_s`: the legitimate topology, with the
/// decommissioned transmitter replaced by the scripted false cell in attack
/// scenarios.
fn transmitters_at(topology: &[CellSite], scenario: &Scenario, t_s: f64) -> Vec<CellSite> {
    match scenario {
        Scenario::Benign => topology.to_vec(),
        Scenario::Attack {
            decommissioned_pci,
            script,
        } => {
            let decommissioned = topology
                .iter()
                .find(|c| c.pci == *decommissioned_pci)
                .expect("validated against the topology");
            let mut cells: Vec<CellSite> = topology
                .iter()
                .filter(|c| c.pci != *decommissioned_pci)
                .cloned()
                .collect();
            cells.push(CellSite {
                pci: script.pci,
                position: false_cell_position(script, t_s),
                height_m: script.height_m,
                tx_power_dbm: decommissioned.tx_power_dbm,
                can_serve: false,
            });
            cells
        }
    }
}

/// Run one scenario to completion and return every emitted report in time
/// order. The run is a pure function of `(config, scenario)`: the same seed
/// reproduces the same log byte for byte.
pub fn run_scenario(
    config: &SimConfig,
    scenario: &Scenario,
) -> Result<Vec<MeasurementReport>, SimError> {
    config.validate()?;
    let topology = build_topology(&config.grid);

    if let Scenario::Attack {
        decommissioned_pci,
        script,
    } = scenario
    {
        script.validate()?;
        if script.pci != *decommissioned_pci {
            return Err(SimError::Config(format!(
                "attack script pci {} does not match decommissioned pci {}",
                script.pci, decommissioned_pci
            )));
        }
        if !topology.iter().any(|c| c.pci == *decommissioned_pci) {
            return Err(SimError::Config(format!(
                "decommissioned pci {decommissioned_pci} is not part of the topology"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Separate stream so that enabling shadowing does not disturb mobility.
    let mut shadow_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);

    let bounds = config.mobility.boundary;
    let mut ues: Vec<UeState> = (0..config.n_ues)
        .map(|ue_id| UeState {
            ue_id,
            position: Position::new(
                rng.gen_range(bounds.min_x..=bounds.max_x),
                rng.gen_range(bounds.min_y..=bounds.max_y),
            ),
            height_m: rng.gen_range(1.5..=2.0),
            heading: rng.gen_range(0.0..std::f64::consts::TAU),
            serving_pci: None,
        })
        .collect();

    let dt = config.report_period_s;
    let warmup_steps = (config.warmup_s / dt).round() as u64;
    let n_steps = (config.duration_s / dt).round() as u64;
    let steps_per_redirect = (config.mobility.redirect_interval_s / dt).round() as u64;

    // The warmup walks and attaches without emitting; the scripted cell
    // holds its dwell position until the clock starts.
    let mut reports = Vec::with_capacity(ues.len() * n_steps as usize);
    for step in 0..warmup_steps + n_steps {
        let t_s = (step as f64 - warmup_steps as f64) * dt;
        let cells = transmitters_at(&topology, scenario, t_s.max(0.0));

        for ue in &mut ues {
            if step > 0 {
                let redirect_due = step % steps_per_redirect == 0;
                *ue = super::step_ue(ue, dt, &config.mobility, redirect_due, &mut rng);
            }
            ue.serving_pci = Some(update_serving(
                ue,
                &cells,
                &config.propagation,
                config.handover_hysteresis_db,
            ));
        }
        if t_s >= 0.0 {
            for ue in &ues {
                let snapshot = measure(ue, &cells, &config.propagation, Some(&mut shadow_rng));
                reports.push(report_from_snapshot(ue, t_s, &snapshot, config));
            }
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_script(pci: u32, start: Position) -> FalseCellScript {
        FalseCellScript {
            pci: Pci(pci),
            start_position: start,
            dwell_s: 200.0,
            height_m: 2.0,
            waypoints: vec![
                Position::new(250.0, -250.0),
                Position::new(250.0, 1750.0),
                Position::new(750.0, 1750.0),
                Position::new(750.0, -250.0),
            ],
            travel_s: 120.0,
        }
    }

    #[test]
    fn topology_is_row_first_with_unit_based_pcis() {
        let cells = build_topology(&GridConfig::default());
        assert_eq!(cells.len(), 12);
        assert_eq!(cells[0].pci, Pci(1));
        assert_eq!(cells[0].position, Position::new(0.0, 0.0));
        assert_eq!(cells[1].position, Position::new(500.0, 0.0));
        assert_eq!(cells[3].position, Position::new(0.0, 500.0));
        assert_eq!(cells[11].position, Position::new(1000.0, 1500.0));
        assert!(cells.iter().all(|c| c.can_serve));
    }

    #[test]
    fn false_cell_dwells_then_travels_then_parks() {
        let script = paper_script(5, Position::new(500.0, 500.0));
        assert_eq!(false_cell_position(&script, 0.0), script.start_position);
        assert_eq!(false_cell_position(&script, 199.9), script.start_position);

        // The polyline is 2000 + 500 + 2000 = 4500 m long; halfway through
        // the travel phase the cell has covered 2250 m, i.e. 250 m into the
        // second segment.
        let mid = false_cell_position(&script, 200.0 + 60.0);
        assert!((mid.x - 500.0).abs() < 1e-9, "{mid:?}");
        assert!((mid.y - 1750.0).abs() < 1e-9, "{mid:?}");

        let end = false_cell_position(&script, 200.0 + 120.0);
        assert_eq!(end, Position::new(750.0, -250.0));
        assert_eq!(false_cell_position(&script, 1e6), Position::new(750.0, -250.0));
    }

    #[test]
    fn travel_without_waypoints_is_a_config_error() {
        let mut script = paper_script(5, Position::new(500.0, 500.0));
        script.waypoints.clear();
        assert!(script.validate().is_err());
        script.travel_s = 0.0;
        assert!(script.validate().is_ok());
    }

    fn test_config() -> SimConfig {
        SimConfig {
            n_ues: 10,
            duration_s: 40.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn empty_population_yields_empty_log() {
        let config = SimConfig {
            n_ues: 0,
            ..test_config()
        };
        assert!(run_scenario(&config, &Scenario::Benign).unwrap().is_empty());
    }

    #[test]
    fn identical_seeds_reproduce_identical_logs() {
        let config = test_config();
        let a = run_scenario(&config, &Scenario::Benign).unwrap();
        let b = run_scenario(&config, &Scenario::Benign).unwrap();
        assert_eq!(a, b);

        let mut other_seed = test_config();
        other_seed.seed = 2;
        assert_ne!(run_scenario(&other_seed, &Scenario::Benign).unwrap(), a);
    }

    #[test]
    fn mismatched_script_pci_is_rejected() {
        let config = test_config();
        let scenario = Scenario::Attack {
            decommissioned_pci: Pci(4),
            script: paper_script(5, Position::new(500.0, 500.0)),
        };
        assert!(run_scenario(&config, &scenario).is_err());
    }

    #[test]
    fn unknown_decommissioned_pci_is_rejected() {
        let config = test_config();
        let scenario = Scenario::Attack {
            decommissioned_pci: Pci(55),
            script: paper_script(55, Position::new(500.0, 500.0)),
        };
        assert!(run_scenario(&config, &scenario).is_err());
    }

    #[test]
    fn neighbors_below_threshold_are_dropped() {
        let mut config = test_config();
        config.neighbor_detect_threshold_dbm = 100.0; // nothing is audible
        let reports = run_scenario(&config, &Scenario::Benign).unwrap();
        assert!(reports.iter().all(|r| r.neighbors.is_empty()));
    }

    #[test]
    fn neighbor_lists_are_sorted_and_truncated() {
        let mut config = test_config();
        config.neighbor_detect_threshold_dbm = -300.0; // 11 audible neighbors
        config.max_neighbors_per_report = 8;
        let reports = run_scenario(&config, &Scenario::Benign).unwrap();
        for r in &reports {
            assert_eq!(r.neighbors.len(), 8);
            for pair in r.neighbors.windows(2) {
                assert!(pair[0].rsrp_dbm >= pair[1].rsrp_dbm);
            }
            assert!(r.neighbors.iter().all(|n| n.pci != r.serving_pci));
        }

        // The truncated entries must be the strongest ones: with everything
        // audible the weakest retained neighbor beats every absent cell by
        // construction, checked via an untruncated run.
        config.max_neighbors_per_report = 11;
        let full = run_scenario(&config, &Scenario::Benign).unwrap();
        for (short, long) in reports.iter().zip(&full) {
            let strongest: Vec<Pci> = long.neighbors[..8].iter().map(|n| n.pci).collect();
            let kept: Vec<Pci> = short.neighbors.iter().map(|n| n.pci).collect();
            assert_eq!(kept, strongest);
        }
    }

    #[test]
    fn false_cell_appears_in_neighbor_lists_but_never_serves() {
        let mut config = test_config();
        config.n_ues = 20;
        config.duration_s = 120.0;
        let script = FalseCellScript {
            dwell_s: 40.0,
            travel_s: 60.0,
            ..paper_script(5, Position::new(500.0, 500.0))
        };
        let scenario = Scenario::Attack {
            decommissioned_pci: Pci(5),
            script,
        };
        let reports = run_scenario(&config, &scenario).unwrap();
        assert!(reports.iter().all(|r| r.serving_pci != Pci(5)));
        let travel_hits = reports
            .iter()
            .filter(|r| r.time_s >= 40.0 && r.neighbors.iter().any(|n| n.pci == Pci(5)))
            .count();
        assert!(travel_hits > 0, "false cell never audible during travel");
    }

    #[test]
    fn reports_stay_inside_the_boundary_in_count_and_cadence() {
        let config = test_config();
        let reports = run_scenario(&config, &Scenario::Benign).unwrap();
        assert_eq!(reports.len(), 10 * 40);
        assert!(reports.iter().all(|r| r.time_s >= 0.0 && r.time_s < 40.0));
    }
}
