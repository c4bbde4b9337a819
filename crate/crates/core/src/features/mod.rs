//! Feature extraction from measurement-report logs.
//!
//! Reports are preprocessed into per-serving-cell records (RSRQ dropped,
//! zero-neighbor reports removed) and turned into numeric matrices using one
//! of three schemes:
//!
//! * `COL` - one fixed column per cataloged neighbor PCI holding its RSRP;
//! * `DST` - per concurrent-neighbor slot, the neighbor RSRP and its ground
//!   distance from the serving cell;
//! * `XY`  - like `DST` but with the neighbor's coordinates relative to the
//!   serving cell instead of the distance.
//!
//! All three share the two leading columns: serving RSRP and neighbor count.
//! Absent entries carry an explicit missing mask until imputation.

mod catalog;
mod extract;
mod impute;
mod preprocess;

pub mod io;

pub use catalog::{fit_neighbor_catalog, flag_static, NeighborCatalog};
pub use extract::{extract_col, extract_dst, extract_xy};
pub use impute::{impute, ImputePolicy, ImputedMatrix};
pub use preprocess::preprocess;

use serde::{Deserialize, Serialize};

use crate::sim::Pci;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("pci {0} is not part of the topology")]
    UnknownPci(Pci),
    #[error("records for serving cell {expected} contain serving cell {found}")]
    MixedServingCells { expected: Pci, found: Pci },
}

/// A preprocessed report: RSRQ already dropped, neighbors as (PCI, RSRP)
/// pairs. `record_id` is the report's index in the raw log, preserved across
/// filtering so downstream labels can be joined back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub record_id: usize,
    pub time_s: f64,
    pub serving_pci: Pci,
    pub serving_rsrp_dbm: f64,
    pub neighbor_list: Vec<(Pci, f64)>,
}

/// Feature extraction scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Col,
    Dst,
    Xy,
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureKind::Col => write!(f, "col"),
            FeatureKind::Dst => write!(f, "dst"),
            FeatureKind::Xy => write!(f, "xy"),
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "col" => Ok(FeatureKind::Col),
            "dst" => Ok(FeatureKind::Dst),
            "xy" => Ok(FeatureKind::Xy),
            other => Err(format!("unknown feature scheme {other:?} (col|dst|xy)")),
        }
    }
}

/// Dense numeric matrix with an explicit missing-value mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl FeatureMatrix {
    pub fn with_columns(column_names: Vec<String>) -> Self {
        Self {
            column_names,
            n_rows: 0,
            values: Vec::new(),
            missing: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    /// Append one row given as present-or-missing entries.
    pub fn push_row(&mut self, row: &[Option<f64>]) {
        assert_eq!(row.len(), self.n_cols(), "row width mismatch");
        for entry in row {
            self.values.push(entry.unwrap_or(0.0));
            self.missing.push(entry.is_none());
        }
        self.n_rows += 1;
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let idx = row * self.n_cols() + col;
        if self.missing[idx] {
            None
        } else {
            Some(self.values[idx])
        }
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        (0..self.n_cols()).map(|c| self.get(row, c)).collect()
    }

    /// Observed values of one column.
    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).filter_map(|r| self.get(r, col)).collect()
    }
}
