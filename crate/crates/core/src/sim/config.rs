use serde::{Deserialize, Serialize};

use super::SimError;

/// Axis-aligned rectangle given by two opposite corners; normalized so that
/// `min` is the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(corner_a: (f64, f64), corner_b: (f64, f64)) -> Self {
        Self {
            min_x: corner_a.0.min(corner_b.0),
            min_y: corner_a.1.min(corner_b.1),
            max_x: corner_a.0.max(corner_b.0),
            max_y: corner_a.1.max(corner_b.1),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn is_degenerate(&self) -> bool {
        self.max_x <= self.min_x || self.max_y <= self.min_y
    }
}

/// Random walk parameters: constant speed, direction redrawn uniformly every
/// `redirect_interval_s`, specular reflection at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    pub boundary: Rect,
    pub speed_mps: f64,
    pub redirect_interval_s: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            boundary: Rect::new((-250.0, -250.0), (1250.0, 1750.0)),
            speed_mps: 5.0,
            redirect_interval_s: 20.0,
        }
    }
}

/// Radio propagation knobs. The path loss model is Okumura-Hata (medium
/// city), so the carrier must stay inside its 150-1500 MHz validity range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub carrier_mhz: f64,
    pub noise_floor_dbm: f64,
    /// N in the 3GPP-style RSRQ definition `N * RSRP / RSSI`.
    pub rsrq_bandwidth_blocks: u32,
    /// Ground distance clamp that avoids the log singularity at zero range.
    pub min_ground_distance_m: f64,
    /// Standard deviation of optional log-normal shadowing applied to emitted
    /// measurements. Zero keeps the propagation fully deterministic.
    pub shadowing_sigma_db: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            carrier_mhz: 900.0,
            noise_floor_dbm: -110.0,
            rsrq_bandwidth_blocks: 25,
            min_ground_distance_m: 1.0,
            shadowing_sigma_db: 0.0,
        }
    }
}

/// Row-first rectangular cell layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub delta_x_m: f64,
    pub delta_y_m: f64,
    pub grid_width: u32,
    pub n_cells: u32,
    pub cell_height_m: f64,
    pub tx_power_dbm: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            delta_x_m: 500.0,
            delta_y_m: 500.0,
            grid_width: 3,
            n_cells: 12,
            cell_height_m: 25.0,
            tx_power_dbm: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub n_ues: u32,
    pub duration_s: f64,
    /// Mobility and serving-cell warmup before the first report: phones walk
    /// and hand over but nothing is emitted. Startup transients of the
    /// attachment process otherwise leak into short runs.
    pub warmup_s: f64,
    pub report_period_s: f64,
    /// Neighbors below this RSRP are inaudible and never reported.
    pub neighbor_detect_threshold_dbm: f64,
    pub max_neighbors_per_report: usize,
    /// Handover happens when a neighbor's RSRQ exceeds the serving RSRQ by
    /// this margin.
    pub handover_hysteresis_db: f64,
    pub seed: u64,
    pub mobility: MobilityConfig,
    pub propagation: PropagationParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            n_ues: 200,
            duration_s: 1000.0,
            warmup_s: 0.0,
            report_period_s: 1.0,
            neighbor_detect_threshold_dbm: -125.0,
            max_neighbors_per_report: 8,
            handover_hysteresis_db: 1.0,
            seed: 1,
            mobility: MobilityConfig::default(),
            propagation: PropagationParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        if self.grid.n_cells == 0 || self.grid.grid_width == 0 {
            return err("grid must contain at least one cell".into());
        }
        if self.grid.cell_height_m <= 0.0 {
            return err("cell height must be positive".into());
        }
        if self.duration_s <= 0.0 || self.report_period_s <= 0.0 {
            return err("durations must be positive".into());
        }
        if self.warmup_s < 0.0 {
            return err("warmup must be non-negative".into());
        }
        if self.max_neighbors_per_report < 1 {
            return err("max_neighbors_per_report must be at least 1".into());
        }
        if self.mobility.boundary.is_degenerate() {
            return err("mobility boundary is degenerate".into());
        }
        if self.mobility.speed_mps <= 0.0 {
            return err("mobility speed must be positive".into());
        }
        if self.mobility.redirect_interval_s <= 0.0 {
            return err("redirect interval must be positive".into());
        }
        let steps = self.mobility.redirect_interval_s / self.report_period_s;
        if (steps - steps.round()).abs() > 1e-9 {
            return err("report period must divide the redirect interval".into());
        }
        if !(150.0..=1500.0).contains(&self.propagation.carrier_mhz) {
            return err(format!(
                "carrier {} MHz outside the Okumura-Hata range 150-1500 MHz",
                self.propagation.carrier_mhz
            ));
        }
        if self.propagation.rsrq_bandwidth_blocks < 1 {
            return err("rsrq_bandwidth_blocks must be at least 1".into());
        }
        if self.propagation.min_ground_distance_m <= 0.0 {
            return err("minimum ground distance must be positive".into());
        }
        Ok(())
    }
}
