//! CSV and config-file formats of the simulator.
//!
//! `reports.csv` holds one row per measurement report with a fixed number of
//! neighbor slots (`nbr{i}_pci`, `nbr{i}_rsrp_dbm`, `nbr{i}_rsrq_db`), empty
//! fields marking absent neighbors. `topology.csv` lists the cell sites.
//! Floats are written in shortest round-trip form with a `.` decimal point,
//! so re-reading a file reproduces the exact in-memory values.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CellSite, FalseCellScript, GridConfig, MeasurementReport, MobilityConfig, NeighborMeasurement,
    Pci, Position, PropagationParams, Rect, Scenario, SimConfig, SimError,
};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed field {field}: {message}")]
    Parse { field: String, message: String },
    #[error("config file error: {0}")]
    Config(String),
}

fn parse<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, IoError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| IoError::Parse {
        field: field.into(),
        message: e.to_string(),
    })
}

pub fn write_reports_csv<W: Write>(
    out: W,
    reports: &[MeasurementReport],
    max_neighbors: usize,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "time_s".to_string(),
        "ue_id".to_string(),
        "serving_pci".to_string(),
        "serving_rsrp_dbm".to_string(),
        "serving_rsrq_db".to_string(),
        "n_neighbors".to_string(),
    ];
    for i in 1..=max_neighbors {
        header.push(format!("nbr{i}_pci"));
        header.push(format!("nbr{i}_rsrp_dbm"));
        header.push(format!("nbr{i}_rsrq_db"));
    }
    w.write_record(&header)?;

    for r in reports {
        let mut row = vec![
            r.time_s.to_string(),
            r.ue_id.to_string(),
            r.serving_pci.to_string(),
            r.serving_rsrp_dbm.to_string(),
            r.serving_rsrq_db.to_string(),
            r.neighbors.len().to_string(),
        ];
        for i in 0..max_neighbors {
            match r.neighbors.get(i) {
                Some(n) => {
                    row.push(n.pci.to_string());
                    row.push(n.rsrp_dbm.to_string());
                    row.push(n.rsrq_db.to_string());
                }
                None => {
                    row.extend(std::iter::repeat(String::new()).take(3));
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<MeasurementReport>, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut reports = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let n_neighbors: usize = parse("n_neighbors", &record[5])?;
        let mut neighbors = Vec::with_capacity(n_neighbors);
        for i in 0..n_neighbors {
            let base = 6 + 3 * i;
            neighbors.push(NeighborMeasurement {
                pci: Pci(parse("nbr_pci", &record[base])?),
                rsrp_dbm: parse("nbr_rsrp_dbm", &record[base + 1])?,
                rsrq_db: parse("nbr_rsrq_db", &record[base + 2])?,
            });
        }
        reports.push(MeasurementReport {
            time_s: parse("time_s", &record[0])?,
            ue_id: parse("ue_id", &record[1])?,
            serving_pci: Pci(parse("serving_pci", &record[2])?),
            serving_rsrp_dbm: parse("serving_rsrp_dbm", &record[3])?,
            serving_rsrq_db: parse("serving_rsrq_db", &record[4])?,
            neighbors,
        });
    }
    Ok(reports)
}

pub fn write_topology_csv<W: Write>(out: W, cells: &[CellSite]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pci", "x_m", "y_m", "height_m", "tx_power_dbm", "can_serve"])?;
    for c in cells {
        w.write_record(&[
            c.pci.to_string(),
            c.position.x.to_string(),
            c.position.y.to_string(),
            c.height_m.to_string(),
            c.tx_power_dbm.to_string(),
            c.can_serve.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_topology_csv<R: Read>(input: R) -> Result<Vec<CellSite>, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut cells = Vec::new();
    for record in rdr.records() {
        let record = record?;
        cells.push(CellSite {
            pci: Pci(parse("pci", &record[0])?),
            position: Position::new(parse("x_m", &record[1])?, parse("y_m", &record[2])?),
            height_m: parse("height_m", &record[3])?,
            tx_power_dbm: parse("tx_power_dbm", &record[4])?,
            can_serve: parse("can_serve", &record[5])?,
        });
    }
    Ok(cells)
}

/// Flat key-value scenario file. Field names mirror `SimConfig`; the
/// optional `scenario`/`attack_pci`/waypoint keys describe the run. All keys
/// default to the standard 12-cell setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub delta_x_m: f64,
    pub delta_y_m: f64,
    pub grid_width: u32,
    pub n_cells: u32,
    pub cell_height_m: f64,
    pub tx_power_dbm: f64,
    pub n_ues: u32,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub report_period_s: f64,
    pub neighbor_detect_threshold_dbm: f64,
    pub max_neighbors_per_report: usize,
    pub handover_hysteresis_db: f64,
    pub seed: u64,
    pub speed_mps: f64,
    pub redirect_interval_s: f64,
    pub boundary_min_x_m: f64,
    pub boundary_min_y_m: f64,
    pub boundary_max_x_m: f64,
    pub boundary_max_y_m: f64,
    pub carrier_mhz: f64,
    pub noise_floor_dbm: f64,
    pub rsrq_bandwidth_blocks: u32,
    pub min_ground_distance_m: f64,
    pub shadowing_sigma_db: f64,
    /// "benign" or "attack".
    pub scenario: String,
    pub attack_pci: Option<u32>,
    pub dwell_s: f64,
    pub travel_s: f64,
    pub false_cell_height_m: f64,
    /// Polyline of the moving false cell as `[x, y]` pairs.
    pub waypoints: Vec<[f64; 2]>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            delta_x_m: sim.grid.delta_x_m,
            delta_y_m: sim.grid.delta_y_m,
            grid_width: sim.grid.grid_width,
            n_cells: sim.grid.n_cells,
            cell_height_m: sim.grid.cell_height_m,
            tx_power_dbm: sim.grid.tx_power_dbm,
            n_ues: sim.n_ues,
            duration_s: sim.duration_s,
            warmup_s: sim.warmup_s,
            report_period_s: sim.report_period_s,
            neighbor_detect_threshold_dbm: sim.neighbor_detect_threshold_dbm,
            max_neighbors_per_report: sim.max_neighbors_per_report,
            handover_hysteresis_db: sim.handover_hysteresis_db,
            seed: sim.seed,
            speed_mps: sim.mobility.speed_mps,
            redirect_interval_s: sim.mobility.redirect_interval_s,
            boundary_min_x_m: sim.mobility.boundary.min_x,
            boundary_min_y_m: sim.mobility.boundary.min_y,
            boundary_max_x_m: sim.mobility.boundary.max_x,
            boundary_max_y_m: sim.mobility.boundary.max_y,
            carrier_mhz: sim.propagation.carrier_mhz,
            noise_floor_dbm: sim.propagation.noise_floor_dbm,
            rsrq_bandwidth_blocks: sim.propagation.rsrq_bandwidth_blocks,
            min_ground_distance_m: sim.propagation.min_ground_distance_m,
            shadowing_sigma_db: sim.propagation.shadowing_sigma_db,
            scenario: "benign".into(),
            attack_pci: None,
            dwell_s: 200.0,
            travel_s: 120.0,
            false_cell_height_m: 2.0,
            waypoints: vec![
                [250.0, -250.0],
                [250.0, 1750.0],
                [750.0, 1750.0],
                [750.0, -250.0],
            ],
        }
    }
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            grid: GridConfig {
                delta_x_m: self.delta_x_m,
                delta_y_m: self.delta_y_m,
                grid_width: self.grid_width,
                n_cells: self.n_cells,
                cell_height_m: self.cell_height_m,
                tx_power_dbm: self.tx_power_dbm,
            },
            n_ues: self.n_ues,
            duration_s: self.duration_s,
            warmup_s: self.warmup_s,
            report_period_s: self.report_period_s,
            neighbor_detect_threshold_dbm: self.neighbor_detect_threshold_dbm,
            max_neighbors_per_report: self.max_neighbors_per_report,
            handover_hysteresis_db: self.handover_hysteresis_db,
            seed: self.seed,
            mobility: MobilityConfig {
                boundary: Rect::new(
                    (self.boundary_min_x_m, self.boundary_min_y_m),
                    (self.boundary_max_x_m, self.boundary_max_y_m),
                ),
                speed_mps: self.speed_mps,
                redirect_interval_s: self.redirect_interval_s,
            },
            propagation: PropagationParams {
                carrier_mhz: self.carrier_mhz,
                noise_floor_dbm: self.noise_floor_dbm,
                rsrq_bandwidth_blocks: self.rsrq_bandwidth_blocks,
                min_ground_distance_m: self.min_ground_distance_m,
                shadowing_sigma_db: self.shadowing_sigma_db,
            },
        }
    }

    /// Build the scenario described by the file. The false cell starts at
    /// the decommissioned cell's site.
    pub fn scenario(&self) -> Result<Scenario, SimError> {
        match self.scenario.as_str() {
            "benign" => Ok(Scenario::Benign),
            "attack" => {
                let pci = Pci(self.attack_pci.ok_or_else(|| {
                    SimError::Config("attack scenario requires attack_pci".into())
                })?);
                let topology = super::build_topology(&self.sim_config().grid);
                let site = topology
                    .iter()
                    .find(|c| c.pci == pci)
                    .ok_or_else(|| SimError::Config(format!("attack_pci {pci} not in grid")))?;
                Ok(Scenario::Attack {
                    decommissioned_pci: pci,
                    script: FalseCellScript {
                        pci,
                        start_position: site.position,
                        dwell_s: self.dwell_s,
                        height_m: self.false_cell_height_m,
                        waypoints: self
                            .waypoints
                            .iter()
                            .map(|w| Position::new(w[0], w[1]))
                            .collect(),
                        travel_s: self.travel_s,
                    },
                })
            }
            other => Err(SimError::Config(format!(
                "scenario must be \"benign\" or \"attack\", got {other:?}"
            ))),
        }
    }
}
