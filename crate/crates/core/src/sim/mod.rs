//! Deterministic radio neighborhood simulator.
//!
//! A rectangular grid of LTE-like cells serves a population of randomly
//! walking phones. Every phone periodically emits a network-side measurement
//! report carrying the serving cell plus the audible neighbors with their
//! RSRP/RSRQ. An attack scenario decommissions one cell and replaces its
//! transmitter with a scripted moving cell that reuses the same PCI but never
//! serves anybody.

mod config;
mod mobility;
mod propagation;
mod scenario;
mod serving;

pub mod io;

pub use config::{GridConfig, MobilityConfig, PropagationParams, Rect, SimConfig};
pub use mobility::step_ue;
pub use propagation::{okumura_hata_loss, rsrp_of, rsrq_of};
pub use scenario::{
    build_topology, emit_report, false_cell_position, run_scenario, FalseCellScript, Scenario,
};
pub use serving::update_serving;

use serde::{Deserialize, Serialize};

/// Physical Cell Identifier broadcast over the air. A false base station may
/// reuse the PCI of a legitimate cell, which is exactly the case this
/// workbench studies.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Pci(pub u32);

impl std::fmt::Display for Pci {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for Pci {
    fn from(v: u32) -> Self {
        Pci(v)
    }
}

/// Ground-plane position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A stationary transmitter. `can_serve` is false for decommissioned cells
/// and for the scripted false cell: such a cell is audible in neighbor lists
/// but never appears as a serving cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSite {
    pub pci: Pci,
    pub position: Position,
    pub height_m: f64,
    pub tx_power_dbm: f64,
    pub can_serve: bool,
}

/// A mobile phone.
#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub ue_id: u32,
    pub position: Position,
    pub height_m: f64,
    /// Walk direction in radians.
    pub heading: f64,
    pub serving_pci: Option<Pci>,
}

/// One neighbor entry of a measurement report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborMeasurement {
    pub pci: Pci,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
}

/// A network-side measurement report: the primary data of the workbench.
/// Neighbors are sorted by descending RSRP and truncated to the configured
/// maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub time_s: f64,
    pub ue_id: u32,
    pub serving_pci: Pci,
    pub serving_rsrp_dbm: f64,
    pub serving_rsrq_db: f64,
    pub neighbors: Vec<NeighborMeasurement>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("propagation domain error: {0}")]
    Domain(String),
}
