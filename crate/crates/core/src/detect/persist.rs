//! Self-describing model files.
//!
//! Models are stored as JSON with a `kind` tag, the training context
//! (serving cell, feature scheme, seed, catalog) and every parameter.
//! Floats are written in shortest round-trip form, so save -> load -> save
//! reproduces identical bytes and identical scores. Thresholds may be
//! infinite before calibration, which JSON numbers cannot carry; those
//! fields serialize through a string fallback.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::FeatureKind;
use crate::sim::Pci;

use super::{AdfModel, AutoencoderModel, RegressionClusteringModel};

/// Serialize a possibly non-finite f64 as a number, or as `"inf"`,
/// `"-inf"`, `"nan"` strings.
pub mod lossless_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text(format!("{v}")).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub serving_pci: Pci,
    pub scheme: FeatureKind,
    pub seed: u64,
    pub catalog_pcis: Vec<Pci>,
    pub trained_rows: usize,
    /// Calibrated score threshold; infinite until calibration ran.
    #[serde(with = "lossless_float")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    Adf {
        meta: ModelMeta,
        model: AdfModel<f64>,
    },
    Autoencoder {
        meta: ModelMeta,
        model: AutoencoderModel<f64>,
    },
    RegressionClustering {
        meta: ModelMeta,
        model: RegressionClusteringModel<f64>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("model encoding failure: {0}")]
    Encode(#[from] serde_json::Error),
}

impl ModelFile {
    pub fn meta(&self) -> &ModelMeta {
        match self {
            ModelFile::Adf { meta, .. }
            | ModelFile::Autoencoder { meta, .. }
            | ModelFile::RegressionClustering { meta, .. } => meta,
        }
    }

    pub fn meta_mut(&mut self) -> &mut ModelMeta {
        match self {
            ModelFile::Adf { meta, .. }
            | ModelFile::Autoencoder { meta, .. }
            | ModelFile::RegressionClustering { meta, .. } => meta,
        }
    }

    pub fn to_json(&self) -> Result<String, PersistError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PersistError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::AdfParams;
    use crate::ml::AdamTrainConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta() -> ModelMeta {
        ModelMeta {
            serving_pci: Pci(8),
            scheme: FeatureKind::Col,
            seed: 42,
            catalog_pcis: vec![Pci(5), Pci(7), Pci(9)],
            trained_rows: 100,
            threshold: f64::INFINITY,
        }
    }

    fn rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| vec![rng.gen_range(-120.0..-60.0), rng.gen_range(0.0..8.0), rng.gen_range(-120.0..-60.0)])
            .collect()
    }

    #[test]
    fn adf_round_trip_is_byte_stable_and_score_exact() {
        let data = rows(200, 3);
        let model = AdfModel::fit(&data, AdfParams::default(), 7).unwrap();
        let file = ModelFile::Adf {
            meta: meta(),
            model,
        };
        let json = file.to_json().unwrap();
        let reloaded = ModelFile::from_json(&json).unwrap();
        assert_eq!(reloaded.to_json().unwrap(), json);

        let (ModelFile::Adf { model: a, .. }, ModelFile::Adf { model: b, .. }) = (&file, &reloaded)
        else {
            panic!("kind changed across the round trip");
        };
        for probe in rows(20, 9) {
            assert_eq!(
                a.score(&probe).unwrap().to_bits(),
                b.score(&probe).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn autoencoder_scores_survive_reserialization() {
        let data = rows(80, 5);
        let cfg = AdamTrainConfig {
            epochs: 10,
            ..AdamTrainConfig::default()
        };
        let (model, _) = AutoencoderModel::fit(&data, &cfg, 1).unwrap();
        let file = ModelFile::Autoencoder {
            meta: meta(),
            model,
        };
        let reloaded = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        let (ModelFile::Autoencoder { model: a, .. }, ModelFile::Autoencoder { model: b, .. }) =
            (&file, &reloaded)
        else {
            panic!("kind changed across the round trip");
        };
        let probe = vec![-90.0, 4.0, -100.0];
        assert_eq!(
            a.score(&probe).unwrap().to_bits(),
            b.score(&probe).unwrap().to_bits()
        );
    }

    #[test]
    fn infinite_thresholds_survive_json() {
        let file = ModelFile::Adf {
            meta: meta(),
            model: AdfModel::fit(&rows(50, 1), AdfParams::default(), 0).unwrap(),
        };
        let json = file.to_json().unwrap();
        assert!(json.contains("\"inf\""));
        let reloaded = ModelFile::from_json(&json).unwrap();
        assert!(reloaded.meta().threshold.is_infinite());
    }
}
