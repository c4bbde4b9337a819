//! Anomaly detection forest.
//!
//! Training has two phases: random binary splits carve a training subsample
//! into small regions, then every leaf stores per-feature anomaly borders
//! `[min - a*w, max + a*w]` around its points, where `w` is the leaf's value
//! range on that feature and `a` the anomaly margin. A row is scored by how
//! far it falls outside the borders of the leaves it reaches, normalized by
//! the leaf range and averaged over trees; rows inside every border score 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::DetectError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdfParams {
    pub n_trees: usize,
    /// Rows drawn (without replacement) per tree. Smaller training sets fall
    /// back to using every row.
    pub subsample: usize,
    /// Anomaly margin `a`: border slack in units of the leaf value range.
    pub margin: f64,
    /// Isolation level: a node stops splitting once its size drops to this
    /// fraction of the subsample.
    pub isolation_level: f64,
    pub max_depth: usize,
}

impl Default for AdfParams {
    fn default() -> Self {
        Self {
            n_trees: 150,
            subsample: 512,
            margin: 1.0,
            isolation_level: 0.05,
            max_depth: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
struct AdfBorder<F: Scalar> {
    lo: F,
    hi: F,
    /// Raw leaf value range before the margin was applied; scores are
    /// expressed in units of this width.
    width: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
enum AdfNode<F: Scalar> {
    Split {
        feature: usize,
        threshold: F,
        left: Box<AdfNode<F>>,
        right: Box<AdfNode<F>>,
    },
    Leaf {
        borders: Vec<AdfBorder<F>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct AdfModel<F: Scalar> {
    n_features: usize,
    params: AdfParams,
    trees: Vec<AdfNode<F>>,
}

impl<F: Scalar> AdfModel<F> {
    pub fn fit(rows: &[Vec<F>], params: AdfParams, seed: u64) -> Result<Self, DetectError> {
        if rows.is_empty() {
            return Err(DetectError::EmptyTrainingData);
        }
        let n_features = rows[0].len();
        if n_features == 0 {
            return Err(DetectError::TooFewColumns { needed: 1, got: 0 });
        }

        let take = params.subsample.min(rows.len());
        if take < params.subsample {
            log::warn!(
                "training set has {} rows, below the {}-row subsample; every tree sees all rows",
                rows.len(),
                params.subsample
            );
        }

        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.gen()).collect();
        let stop_size = params.isolation_level * take as f64;

        let trees = tree_seeds
            .into_iter()
            .map(|tree_seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let subsample = rand::seq::index::sample(&mut rng, rows.len(), take).into_vec();
                grow(rows, subsample, 0, &params, stop_size, &mut rng)
            })
            .collect();

        Ok(Self {
            n_features,
            params,
            trees,
        })
    }

    /// Mean over trees of the leaf-relative border violation; zero for rows
    /// inside every border.
    pub fn score(&self, row: &[F]) -> Result<F, DetectError> {
        if row.len() != self.n_features {
            return Err(DetectError::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let total = self
            .trees
            .iter()
            .fold(F::zero(), |acc, t| acc + violation(t, row));
        Ok(total / F::from_f64_lossy(self.trees.len() as f64))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn params(&self) -> &AdfParams {
        &self.params
    }
}

fn violation<F: Scalar>(node: &AdfNode<F>, row: &[F]) -> F {
    match node {
        AdfNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if row[*feature] < *threshold {
                violation(left, row)
            } else {
                violation(right, row)
            }
        }
        AdfNode::Leaf { borders } => {
            let mut worst = F::zero();
            for (border, &v) in borders.iter().zip(row) {
                let denom = if border.width > F::zero() {
                    border.width
                } else {
                    F::one()
                };
                let excess = if v < border.lo {
                    (border.lo - v) / denom
                } else if v > border.hi {
                    (v - border.hi) / denom
                } else {
                    F::zero()
                };
                if excess > worst {
                    worst = excess;
                }
            }
            worst
        }
    }
}

fn make_leaf<F: Scalar>(rows: &[Vec<F>], indices: &[usize], margin: f64) -> AdfNode<F> {
    let n_features = rows[0].len();
    let margin = F::from_f64_lossy(margin);
    let borders = (0..n_features)
        .map(|f| {
            let mut lo = rows[indices[0]][f];
            let mut hi = lo;
            for &i in &indices[1..] {
                let v = rows[i][f];
                if v < lo {
                    lo = v;
                }
                if v > hi {
                    hi = v;
                }
            }
            let width = hi - lo;
            AdfBorder {
                lo: lo - margin * width,
                hi: hi + margin * width,
                width,
            }
        })
        .collect();
    AdfNode::Leaf { borders }
}

fn grow<F: Scalar>(
    rows: &[Vec<F>],
    indices: Vec<usize>,
    depth: usize,
    params: &AdfParams,
    stop_size: f64,
    rng: &mut ChaCha8Rng,
) -> AdfNode<F> {
    if depth >= params.max_depth || indices.len() as f64 <= stop_size || indices.len() <= 1 {
        return make_leaf(rows, &indices, params.margin);
    }

    // Splittable features: those with a spread of values inside this node.
    let n_features = rows[0].len();
    let mut ranges = Vec::with_capacity(n_features);
    for f in 0..n_features {
        let mut lo = rows[indices[0]][f];
        let mut hi = lo;
        for &i in &indices[1..] {
            let v = rows[i][f];
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        if hi > lo {
            ranges.push((f, lo, hi));
        }
    }
    if ranges.is_empty() {
        return make_leaf(rows, &indices, params.margin);
    }

    let (feature, lo, hi) = ranges[rng.gen_range(0..ranges.len())];
    let threshold = rng.gen_range(lo..hi);
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.into_iter().partition(|&i| rows[i][feature] < threshold);
    if left_idx.is_empty() || right_idx.is_empty() {
        // Degenerate draw at the range edge.
        let all: Vec<usize> = left_idx.into_iter().chain(right_idx).collect();
        return make_leaf(rows, &all, params.margin);
    }

    AdfNode::Split {
        feature,
        threshold,
        left: Box::new(grow(rows, left_idx, depth + 1, params, stop_size, rng)),
        right: Box::new(grow(rows, right_idx, depth + 1, params, stop_size, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_blob(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect()
    }

    /// Rank-based ROC-AUC, independent of the scoring implementation.
    fn roc_auc(scores_benign: &[f64], scores_anomalous: &[f64]) -> f64 {
        let mut wins = 0.0;
        for &a in scores_anomalous {
            for &b in scores_benign {
                if a > b {
                    wins += 1.0;
                } else if a == b {
                    wins += 0.5;
                }
            }
        }
        wins / (scores_anomalous.len() * scores_benign.len()) as f64
    }

    #[test]
    fn identical_training_points_collapse_borders() {
        let rows = vec![vec![2.0, -3.0]; 40];
        let model = AdfModel::fit(&rows, AdfParams::default(), 1).unwrap();
        assert_eq!(model.score(&[2.0, -3.0]).unwrap(), 0.0);
        assert!(model.score(&[2.1, -3.0]).unwrap() > 0.0);
        assert!(model.score(&[2.0, 5.0]).unwrap() > 0.0);
    }

    #[test]
    fn training_points_score_zero_when_fully_sampled() {
        // Fewer rows than the subsample, so every tree sees every row and
        // all training points sit inside all borders.
        let rows = uniform_blob(300, 5);
        let model = AdfModel::fit(&rows, AdfParams::default(), 2).unwrap();
        for row in &rows {
            assert_eq!(model.score(row).unwrap(), 0.0);
        }
    }

    #[test]
    fn planted_far_outliers_are_separable() {
        let train = uniform_blob(2000, 11);
        let model = AdfModel::fit(&train, AdfParams::default(), 3).unwrap();

        let benign: Vec<f64> = uniform_blob(400, 17)
            .iter()
            .map(|r| model.score(r).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let outliers: Vec<f64> = (0..20)
            .map(|_| {
                let r = vec![rng.gen_range(3.0..4.0), rng.gen_range(3.0..4.0)];
                model.score(&r).unwrap()
            })
            .collect();

        let auc = roc_auc(&benign, &outliers);
        assert!(auc >= 0.95, "ROC-AUC {auc}");
    }

    #[test]
    fn default_model_has_150_trees() {
        let rows = uniform_blob(600, 7);
        let model = AdfModel::fit(&rows, AdfParams::default(), 0).unwrap();
        assert_eq!(model.n_trees(), 150);
    }

    #[test]
    fn duplicated_trees_leave_the_score_unchanged() {
        let rows = uniform_blob(100, 9);
        let model = AdfModel::fit(&rows, AdfParams::default(), 4).unwrap();
        let mut doubled = model.clone();
        doubled.trees.extend(model.trees.clone());
        for probe in [[0.5, 0.5], [2.0, -1.0], [0.1, 3.3]] {
            let a = model.score(&probe).unwrap();
            let b = doubled.score(&probe).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_tree_toy_model_matches_hand_computed_violations() {
        // Tree 1: leaf over values [0, 1] -> width 1, borders [-1, 2].
        // Tree 2: leaf over values [0, 2] -> width 2, borders [-2, 4].
        // At x = 5: tree 1 violates by (5-2)/1 = 3 (three range-widths
        // outside), tree 2 by (5-4)/2 = 0.5; the score is the mean 1.75.
        let leaf = |lo: f64, hi: f64, width: f64| AdfNode::Leaf {
            borders: vec![AdfBorder { lo, hi, width }],
        };
        let model = AdfModel {
            n_features: 1,
            params: AdfParams::default(),
            trees: vec![leaf(-1.0, 2.0, 1.0), leaf(-2.0, 4.0, 2.0)],
        };
        assert_eq!(model.score(&[5.0]).unwrap(), 1.75);
        assert_eq!(model.score(&[0.5]).unwrap(), 0.0);
    }

    #[test]
    fn moving_further_out_never_lowers_the_score() {
        let rows = uniform_blob(500, 31);
        let model = AdfModel::fit(&rows, AdfParams::default(), 6).unwrap();
        // Start beyond every split and border on feature 0 (training data
        // lives in [0, 1], margins at most one width).
        let mut prev = 0.0;
        for step in 0..50 {
            let x = 2.5 + step as f64 * 0.5;
            let score = model.score(&[x, 0.5]).unwrap();
            assert!(score >= prev, "score dropped from {prev} to {score} at {x}");
            prev = score;
        }
        assert!(prev > 0.0);
    }

    #[test]
    fn fit_is_deterministic_in_the_seed() {
        let rows = uniform_blob(200, 13);
        let a = AdfModel::fit(&rows, AdfParams::default(), 8).unwrap();
        let b = AdfModel::fit(&rows, AdfParams::default(), 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let rows: Vec<Vec<f64>> = Vec::new();
        assert!(AdfModel::fit(&rows, AdfParams::default(), 0).is_err());
    }
}
