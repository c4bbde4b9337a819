//! Feature matrix CSV files with a TOML sidecar describing how they were
//! produced (scheme, catalog, imputation policy).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::io::IoError;
use crate::sim::Pci;

use super::{FeatureKind, FeatureMatrix, ImputePolicy, NeighborCatalog};

pub fn write_features_csv<W: Write>(out: W, matrix: &FeatureMatrix) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&matrix.column_names)?;
    for r in 0..matrix.n_rows() {
        let row: Vec<String> = (0..matrix.n_cols())
            .map(|c| match matrix.get(r, c) {
                Some(v) => v.to_string(),
                None => String::new(),
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: std::io::Read>(input: R) -> Result<FeatureMatrix, IoError> {
    let mut rdr = csv::Reader::from_reader(input);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut matrix = FeatureMatrix::with_columns(names);
    for record in rdr.records() {
        let record = record?;
        let row: Result<Vec<Option<f64>>, IoError> = record
            .iter()
            .map(|field| {
                if field.is_empty() {
                    Ok(None)
                } else {
                    field
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|e| IoError::Parse {
                            field: "feature".into(),
                            message: e.to_string(),
                        })
                }
            })
            .collect();
        matrix.push_row(&row?);
    }
    Ok(matrix)
}

/// Sidecar metadata stored next to each features.csv.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub serving_pci: Pci,
    pub scheme: FeatureKind,
    pub catalog_pcis: Vec<Pci>,
    pub max_concurrent_neighbors: usize,
    pub impute: ImputePolicy,
    /// Unit of the RSRP columns as produced by the simulator.
    pub rsrp_unit: String,
}

impl FeatureMeta {
    pub fn new(catalog: &NeighborCatalog, scheme: FeatureKind, impute: ImputePolicy) -> Self {
        Self {
            serving_pci: catalog.serving_pci,
            scheme,
            catalog_pcis: catalog.known_neighbors.iter().copied().collect(),
            max_concurrent_neighbors: catalog.max_concurrent_neighbors,
            impute,
            rsrp_unit: "dBm".into(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let text = toml::to_string_pretty(self).map_err(|e| IoError::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        toml::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| IoError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip_with_missing_entries() {
        let mut m = FeatureMatrix::with_columns(vec!["a".into(), "b".into()]);
        m.push_row(&[Some(45.5), None]);
        m.push_row(&[None, Some(-102.25)]);
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "a,b\n45.5,\n,-102.25\n");
        assert_eq!(read_features_csv(buf.as_slice()).unwrap(), m);
    }
}
