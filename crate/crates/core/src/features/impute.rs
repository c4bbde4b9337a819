use serde::{Deserialize, Serialize};

use super::FeatureMatrix;

/// How missing entries become numbers before a detector sees them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ImputePolicy {
    /// Replace every missing entry with a constant. Zero mirrors the
    /// "not heard means no power" convention.
    FillValue { value: f64 },
    /// Replace missing entries of a column with that column's observed
    /// minimum lowered by `delta`, so fills always sit below real data.
    /// Columns without any observed value fall back to zero.
    PerColumnMinMinus { delta: f64 },
}

impl Default for ImputePolicy {
    fn default() -> Self {
        ImputePolicy::FillValue { value: 0.0 }
    }
}

/// Dense matrix after imputation. The original missing mask rides along for
/// detectors that care about observedness.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedMatrix {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub missing: Vec<Vec<bool>>,
}

impl ImputedMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }
}

pub fn impute(matrix: &FeatureMatrix, policy: ImputePolicy) -> ImputedMatrix {
    let n_cols = matrix.n_cols();
    let fills: Vec<f64> = match policy {
        ImputePolicy::FillValue { value } => vec![value; n_cols],
        ImputePolicy::PerColumnMinMinus { delta } => (0..n_cols)
            .map(|c| {
                matrix
                    .column_values(c)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            })
            .map(|min| if min.is_finite() { min - delta } else { 0.0 })
            .collect(),
    };

    let mut rows = Vec::with_capacity(matrix.n_rows());
    let mut missing = Vec::with_capacity(matrix.n_rows());
    for r in 0..matrix.n_rows() {
        let mut row = Vec::with_capacity(n_cols);
        let mut mask = Vec::with_capacity(n_cols);
        for c in 0..n_cols {
            match matrix.get(r, c) {
                Some(v) => {
                    row.push(v);
                    mask.push(false);
                }
                None => {
                    row.push(fills[c]);
                    mask.push(true);
                }
            }
        }
        rows.push(row);
        missing.push(mask);
    }

    ImputedMatrix {
        column_names: matrix.column_names.clone(),
        rows,
        missing,
    }
}
