use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{AdfParams, DetectorKind, RcParams};
use crate::features::{FeatureKind, ImputePolicy};
use crate::ml::AdamTrainConfig;
use crate::sim::{
    FalseCellScript, GridConfig, MobilityConfig, Pci, Position, PropagationParams, Rect, Scenario,
    SimConfig,
};

use super::PipelineError;

/// One detector/feature-scheme combination, written `detector:scheme`
/// (for example `adf:col`). Regression clustering only runs on COL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub scheme: FeatureKind,
}

impl std::fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.kind, self.scheme)
    }
}

impl std::str::FromStr for DetectorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, scheme) = s
            .split_once(':')
            .ok_or_else(|| format!("expected detector:scheme, got {s:?}"))?;
        let spec = DetectorSpec {
            kind: kind.parse()?,
            scheme: scheme.parse()?,
        };
        if spec.kind == DetectorKind::Rc && spec.scheme != FeatureKind::Col {
            return Err(format!(
                "regression clustering runs on col features only, got {s:?}"
            ));
        }
        Ok(spec)
    }
}

impl TryFrom<String> for DetectorSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DetectorSpec> for String {
    fn from(spec: DetectorSpec) -> String {
        spec.to_string()
    }
}

/// Radio and layout settings shared by every phase of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSettings {
    pub delta_x_m: f64,
    pub delta_y_m: f64,
    pub grid_width: u32,
    pub n_cells: u32,
    pub cell_height_m: f64,
    pub tx_power_dbm: f64,
    pub warmup_s: f64,
    pub report_period_s: f64,
    pub neighbor_detect_threshold_dbm: f64,
    pub max_neighbors_per_report: usize,
    pub handover_hysteresis_db: f64,
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
}

impl Default for RadioSettings {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            delta_x_m: sim.grid.delta_x_m,
            delta_y_m: sim.grid.delta_y_m,
            grid_width: sim.grid.grid_width,
            n_cells: sim.grid.n_cells,
            cell_height_m: sim.grid.cell_height_m,
            tx_power_dbm: sim.grid.tx_power_dbm,
            warmup_s: sim.warmup_s,
            report_period_s: sim.report_period_s,
            neighbor_detect_threshold_dbm: sim.neighbor_detect_threshold_dbm,
            max_neighbors_per_report: sim.max_neighbors_per_report,
            handover_hysteresis_db: sim.handover_hysteresis_db,
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
        }
    }
}

impl RadioSettings {
    pub fn sim_config(&self, n_ues: u32, duration_s: f64, seed: u64) -> SimConfig {
        SimConfig {
            grid: GridConfig {
                delta_x_m: self.delta_x_m,
                delta_y_m: self.delta_y_m,
                grid_width: self.grid_width,
                n_cells: self.n_cells,
                cell_height_m: self.cell_height_m,
                tx_power_dbm: self.tx_power_dbm,
            },
            n_ues,
            duration_s,
            warmup_s: self.warmup_s,
            report_period_s: self.report_period_s,
            neighbor_detect_threshold_dbm: self.neighbor_detect_threshold_dbm,
            max_neighbors_per_report: self.max_neighbors_per_report,
            handover_hysteresis_db: self.handover_hysteresis_db,
            seed,
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
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainPhase {
    pub n_ues: u32,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for TrainPhase {
    fn default() -> Self {
        Self {
            n_ues: 200,
            duration_s: 1000.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestPhase {
    pub n_ues: u32,
    pub seed: u64,
    pub dwell_s: f64,
    pub travel_s: f64,
    pub false_cell_height_m: f64,
    pub waypoints: Vec<[f64; 2]>,
}

impl Default for TestPhase {
    fn default() -> Self {
        Self {
            n_ues: 100,
            seed: 9,
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

/// Validation runs mirror the test scenario's dwell phase with a different
/// seed; only their benign-labeled records feed calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationPhase {
    pub seed: u64,
    /// Phones in the validation runs; defaults to the test population.
    pub n_ues: Option<u32>,
}

impl Default for ValidationPhase {
    fn default() -> Self {
        Self {
            seed: 5,
            n_ues: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub target_fpr: f64,
    pub detectors: Vec<DetectorSpec>,
    /// Cells that take turns acting as the moving false cell.
    pub scenario_pcis: Vec<u32>,
    pub impute: ImputePolicy,
    /// Width of one false-cell position bin in the aggregation.
    pub position_bin_s: f64,
    pub sim: RadioSettings,
    pub train: TrainPhase,
    pub validation: ValidationPhase,
    pub test: TestPhase,
    pub adf_params: AdfParams,
    pub ae_params: AdamTrainConfig,
    pub rc_params: RcParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs/out"),
            target_fpr: 0.005,
            detectors: vec![DetectorSpec {
                kind: DetectorKind::Adf,
                scheme: FeatureKind::Col,
            }],
            scenario_pcis: (1..=12).collect(),
            impute: ImputePolicy::default(),
            position_bin_s: 1.0,
            sim: RadioSettings::default(),
            train: TrainPhase::default(),
            validation: ValidationPhase::default(),
            test: TestPhase::default(),
            adf_params: AdfParams::default(),
            ae_params: AdamTrainConfig::default(),
            rc_params: RcParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0 < self.target_fpr && self.target_fpr < 1.0) {
            return Err(PipelineError::Config(format!(
                "target_fpr must lie in (0, 1), got {}",
                self.target_fpr
            )));
        }
        if self.detectors.is_empty() {
            return Err(PipelineError::Config("no detectors configured".into()));
        }
        if self.position_bin_s <= 0.0 {
            return Err(PipelineError::Config("position_bin_s must be positive".into()));
        }
        for &pci in &self.scenario_pcis {
            if pci == 0 || pci > self.sim.n_cells {
                return Err(PipelineError::Config(format!(
                    "scenario pci {pci} outside the {}-cell grid",
                    self.sim.n_cells
                )));
            }
        }
        self.training_sim_config()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn training_sim_config(&self) -> SimConfig {
        self.sim
            .sim_config(self.train.n_ues, self.train.duration_s, self.train.seed)
    }

    pub fn test_sim_config(&self) -> SimConfig {
        self.sim.sim_config(
            self.test.n_ues,
            self.test.dwell_s + self.test.travel_s,
            self.test.seed,
        )
    }

    pub fn validation_sim_config(&self) -> SimConfig {
        self.sim.sim_config(
            self.validation.n_ues.unwrap_or(self.test.n_ues),
            self.test.dwell_s,
            self.validation.seed,
        )
    }

    /// The attack script for one decommissioned cell: dwell at its site,
    /// then traverse the configured waypoints.
    pub fn attack_scenario(&self, false_pci: Pci) -> Result<Scenario, PipelineError> {
        let topology = crate::sim::build_topology(&self.training_sim_config().grid);
        let site = topology
            .iter()
            .find(|c| c.pci == false_pci)
            .ok_or_else(|| {
                PipelineError::Config(format!("pci {false_pci} is not part of the topology"))
            })?;
        Ok(Scenario::Attack {
            decommissioned_pci: false_pci,
            script: FalseCellScript {
                pci: false_pci,
                start_position: site.position,
                dwell_s: self.test.dwell_s,
                height_m: self.test.false_cell_height_m,
                waypoints: self
                    .test
                    .waypoints
                    .iter()
                    .map(|w| Position::new(w[0], w[1]))
                    .collect(),
                travel_s: self.test.travel_s,
            },
        })
    }

    /// Feature schemes any configured detector needs.
    pub fn schemes(&self) -> Vec<FeatureKind> {
        let mut schemes: Vec<FeatureKind> = self.detectors.iter().map(|d| d.scheme).collect();
        schemes.sort_by_key(|s| format!("{s}"));
        schemes.dedup();
        schemes
    }

    /// Canonical serialization used for the manifest hash.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
