//! Autoencoder novelty detector: per-column standardization followed by an
//! hourglass reconstruction network; the score is the mean squared
//! reconstruction error in standardized space.

use serde::{Deserialize, Serialize};

use crate::ml::{adam_train, AdamTrainConfig, DenseNet, TrainReport};
use crate::scalar::Scalar;

use super::DetectError;

/// Per-column z-scoring fitted on training data. Zero-variance columns keep
/// a unit scale so they pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct Standardizer<F: Scalar> {
    means: Vec<F>,
    stds: Vec<F>,
}

impl<F: Scalar> Standardizer<F> {
    pub fn fit(rows: &[Vec<F>]) -> Self {
        let n_cols = rows[0].len();
        let n = F::from_f64_lossy(rows.len() as f64);
        let mut means = vec![F::zero(); n_cols];
        for row in rows {
            for (m, &v) in means.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        for m in &mut means {
            *m = *m / n;
        }
        let mut vars = vec![F::zero(); n_cols];
        for row in rows {
            for ((s, &v), &m) in vars.iter_mut().zip(row).zip(&means) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|s| {
                let std = (s / n).sqrt();
                if std > F::zero() {
                    std
                } else {
                    F::one()
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn transform(&self, row: &[F]) -> Vec<F> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct AutoencoderModel<F: Scalar> {
    standardizer: Standardizer<F>,
    net: DenseNet<F>,
}

impl<F: Scalar> AutoencoderModel<F> {
    /// Standardize the training matrix, then train the hourglass network to
    /// reproduce it.
    pub fn fit(
        rows: &[Vec<F>],
        cfg: &AdamTrainConfig,
        seed: u64,
    ) -> Result<(Self, TrainReport), DetectError> {
        if rows.is_empty() {
            return Err(DetectError::EmptyTrainingData);
        }
        let n_features = rows[0].len();
        if n_features < 2 {
            return Err(DetectError::TooFewColumns {
                needed: 2,
                got: n_features,
            });
        }

        let standardizer = Standardizer::fit(rows);
        let standardized: Vec<Vec<F>> = rows.iter().map(|r| standardizer.transform(r)).collect();
        let mut net = DenseNet::hourglass(n_features, seed);
        let report = adam_train(&mut net, &standardized, cfg, seed).map_err(DetectError::Ml)?;
        Ok((Self { standardizer, net }, report))
    }

    /// Mean squared reconstruction error of the standardized row.
    pub fn score(&self, row: &[F]) -> Result<F, DetectError> {
        if row.len() != self.net.n_inputs() {
            return Err(DetectError::DimensionMismatch {
                expected: self.net.n_inputs(),
                got: row.len(),
            });
        }
        Ok(self.net.reconstruction_mse(&self.standardizer.transform(row)))
    }

    pub fn net(&self) -> &DenseNet<F> {
        &self.net
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quick_cfg(epochs: usize) -> AdamTrainConfig {
        AdamTrainConfig {
            epochs,
            ..AdamTrainConfig::default()
        }
    }

    fn blob(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = rng.gen_range(-40.0..40.0);
                vec![a, 0.5 * a + rng.gen_range(-4.0..4.0), rng.gen_range(90.0..110.0)]
            })
            .collect()
    }

    #[test]
    fn ten_features_make_an_8_5_8_hourglass() {
        let rows = vec![vec![0.0; 10], vec![1.0; 10], vec![2.0; 10]];
        let (model, _) = AutoencoderModel::fit(&rows, &quick_cfg(1), 0).unwrap();
        assert_eq!(model.net().layer_sizes(), &[10, 8, 5, 8, 10]);
    }

    #[test]
    fn training_reduces_reconstruction_error() {
        let rows = blob(250, 3);
        let (_, report) = AutoencoderModel::fit(&rows, &quick_cfg(40), 1).unwrap();
        assert!(report.final_mse() < report.initial_mse);
    }

    #[test]
    fn single_point_training_set_scores_near_zero_on_itself() {
        let rows = vec![vec![-80.0, 3.0, 210.0, -5.5]; 60];
        let (model, _) = AutoencoderModel::fit(&rows, &quick_cfg(100), 2).unwrap();
        // The lone training point standardizes to the origin, which the
        // biases reproduce almost exactly.
        assert!(model.score(&rows[0]).unwrap() < 1e-6);
    }

    #[test]
    fn far_out_rows_score_above_the_training_distribution() {
        let rows = blob(400, 7);
        let (model, _) = AutoencoderModel::fit(&rows, &quick_cfg(60), 4).unwrap();
        let mut train_scores: Vec<f64> = rows.iter().map(|r| model.score(r).unwrap()).collect();
        train_scores.sort_by(f64::total_cmp);
        let p99 = train_scores[(train_scores.len() * 99) / 100];

        // Each feature 10 sigma away from the training mean.
        let standardizer = Standardizer::fit(&rows);
        let far: Vec<f64> = standardizer
            .means
            .iter()
            .zip(&standardizer.stds)
            .map(|(&m, &s)| m + 10.0 * s)
            .collect();
        assert!(model.score(&far).unwrap() > p99);
    }

    #[test]
    fn zero_variance_columns_survive_standardization() {
        let rows: Vec<Vec<f64>> = vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]];
        let (model, _) = AutoencoderModel::fit(&rows, &quick_cfg(5), 5).unwrap();
        assert!(model.score(&[5.0, 2.0]).unwrap().is_finite());
    }

    #[test]
    fn fewer_than_two_features_is_an_error() {
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(AutoencoderModel::fit(&rows, &quick_cfg(1), 0).is_err());
    }
}
