use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means `max(1, floor(sqrt(F)))`.
    pub n_split_features: Option<usize>,
    /// Draw a bootstrap sample per tree. Turning this off fits every tree on
    /// the full data, which makes a single unconstrained tree an exact
    /// memorizer.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 16,
            min_leaf: 2,
            n_split_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
enum TreeNode<F: Scalar> {
    Leaf {
        value: F,
    },
    Split {
        feature: usize,
        threshold: F,
        left: Box<TreeNode<F>>,
        right: Box<TreeNode<F>>,
    },
}

impl<F: Scalar> TreeNode<F> {
    fn predict(&self, x: &[F]) -> F {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

/// Bagged regression trees with variance-reduction splits; every leaf holds
/// the mean of its training targets and the forest predicts the mean over
/// trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct RandomForestRegressor<F: Scalar> {
    n_features: usize,
    params: ForestParams,
    trees: Vec<TreeNode<F>>,
}

impl<F: Scalar> RandomForestRegressor<F> {
    pub fn fit(x: &[Vec<F>], y: &[F], params: ForestParams, seed: u64) -> Result<Self, MlError> {
        if x.is_empty() {
            return Err(MlError::EmptyInput);
        }
        if x.len() != y.len() {
            return Err(MlError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let n_features = x[0].len();
        if x.iter().any(|row| row.len() != n_features) {
            return Err(MlError::DimensionMismatch {
                expected: n_features,
                got: x.iter().map(Vec::len).find(|&l| l != n_features).unwrap(),
            });
        }

        let mtry = params
            .n_split_features
            .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
            .clamp(1, n_features.max(1));

        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.gen()).collect();

        let trees = tree_seeds
            .into_iter()
            .map(|tree_seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let indices: Vec<usize> = if params.bootstrap {
                    (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                grow(x, y, indices, 0, &params, mtry, &mut rng)
            })
            .collect();

        Ok(Self {
            n_features,
            params,
            trees,
        })
    }

    pub fn predict(&self, x: &[F]) -> Result<F, MlError> {
        if x.len() != self.n_features {
            return Err(MlError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let sum = self
            .trees
            .iter()
            .fold(F::zero(), |acc, t| acc + t.predict(x));
        Ok(sum / F::from_f64_lossy(self.trees.len() as f64))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn mean<F: Scalar>(y: &[F], indices: &[usize]) -> F {
    let sum = indices.iter().fold(F::zero(), |acc, &i| acc + y[i]);
    sum / F::from_f64_lossy(indices.len() as f64)
}

struct BestSplit<F> {
    feature: usize,
    threshold: F,
    cost: F,
}

fn grow<F: Scalar>(
    x: &[Vec<F>],
    y: &[F],
    indices: Vec<usize>,
    depth: usize,
    params: &ForestParams,
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode<F> {
    let leaf = |indices: &[usize]| TreeNode::Leaf {
        value: mean(y, indices),
    };
    if depth >= params.max_depth || indices.len() < 2 * params.min_leaf.max(1) {
        return leaf(&indices);
    }
    let first = y[indices[0]];
    if indices.iter().all(|&i| y[i] == first) {
        return leaf(&indices);
    }

    let n_features = x[0].len();
    let mut features: Vec<usize> = (0..n_features).collect();
    features.shuffle(rng);
    features.truncate(mtry);

    let mut best: Option<BestSplit<F>> = None;
    for &feature in &features {
        let mut sorted = indices.clone();
        sorted.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).unwrap());

        // Prefix sums let every candidate split be scored in O(1).
        let mut sum_left = F::zero();
        let mut sum_sq_left = F::zero();
        let total: F = sorted.iter().fold(F::zero(), |a, &i| a + y[i]);
        let total_sq: F = sorted.iter().fold(F::zero(), |a, &i| a + y[i] * y[i]);

        for split_at in 1..sorted.len() {
            let yi = y[sorted[split_at - 1]];
            sum_left = sum_left + yi;
            sum_sq_left = sum_sq_left + yi * yi;

            if split_at < params.min_leaf.max(1) || sorted.len() - split_at < params.min_leaf.max(1)
            {
                continue;
            }
            let lo = x[sorted[split_at - 1]][feature];
            let hi = x[sorted[split_at]][feature];
            if lo == hi {
                continue;
            }

            let n_left = F::from_f64_lossy(split_at as f64);
            let n_right = F::from_f64_lossy((sorted.len() - split_at) as f64);
            let sum_right = total - sum_left;
            let sse_left = sum_sq_left - sum_left * sum_left / n_left;
            let sse_right = (total_sq - sum_sq_left) - sum_right * sum_right / n_right;
            let cost = sse_left + sse_right;

            if best.as_ref().map_or(true, |b| cost < b.cost) {
                best = Some(BestSplit {
                    feature,
                    threshold: (lo + hi) / F::from_f64_lossy(2.0),
                    cost,
                });
            }
        }
    }

    match best {
        None => leaf(&indices),
        Some(split) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .into_iter()
                .partition(|&i| x[i][split.feature] <= split.threshold);
            TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow(x, y, left_idx, depth + 1, params, mtry, rng)),
                right: Box::new(grow(x, y, right_idx, depth + 1, params, mtry, rng)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_targets_predict_the_constant() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let y = vec![4.25; 50];
        let forest = RandomForestRegressor::fit(&x, &y, ForestParams::default(), 1).unwrap();
        for row in &x {
            assert_eq!(forest.predict(row).unwrap(), 4.25);
        }
    }

    #[test]
    fn identity_target_generalizes_on_a_grid() {
        // y = x0 with two noise features; held-out R^2 against the
        // generating function must clear 0.9.
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        for i in 0..400 {
            let v = i as f64 / 4.0;
            train_x.push(vec![v, (i * 31 % 17) as f64, (i * 13 % 7) as f64]);
            train_y.push(v);
        }
        let forest =
            RandomForestRegressor::fit(&train_x, &train_y, ForestParams::default(), 9).unwrap();

        let mut sse = 0.0;
        let mut sst = 0.0;
        let mean = 49.875; // mean of the held-out targets below
        for i in 0..399 {
            let v = i as f64 / 4.0 + 0.125; // strictly between grid points
            let pred = forest.predict(&[v, 3.0, 4.0]).unwrap();
            sse += (pred - v) * (pred - v);
            sst += (v - mean) * (v - mean);
        }
        let r2 = 1.0 - sse / sst;
        assert!(r2 >= 0.9, "held-out R^2 = {r2}");
    }

    #[test]
    fn single_unbagged_tree_memorizes_unique_rows() {
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| (i * i) as f64).collect();
        let params = ForestParams {
            n_trees: 1,
            max_depth: 64,
            min_leaf: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let forest = RandomForestRegressor::fit(&x, &y, params, 0).unwrap();
        for (row, &target) in x.iter().zip(&y) {
            assert_eq!(forest.predict(row).unwrap(), target);
        }
    }

    #[test]
    fn prediction_stays_within_the_target_range() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1]).collect();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let forest = RandomForestRegressor::fit(&x, &y, ForestParams::default(), 4).unwrap();
        for _ in 0..200 {
            let q = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
            let p = forest.predict(&q).unwrap();
            assert!(p >= lo && p <= hi, "{p} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn forest_prediction_is_the_mean_over_trees() {
        // Three hand-built stumps: predictions 1, 2 and 6 for x < 0.5.
        let stump = |threshold: f64, left: f64, right: f64| TreeNode::Split {
            feature: 0,
            threshold,
            left: Box::new(TreeNode::Leaf { value: left }),
            right: Box::new(TreeNode::Leaf { value: right }),
        };
        let forest = RandomForestRegressor {
            n_features: 1,
            params: ForestParams::default(),
            trees: vec![stump(0.5, 1.0, 10.0), stump(0.5, 2.0, 20.0), stump(0.5, 6.0, 30.0)],
        };
        assert_eq!(forest.predict(&[0.0]).unwrap(), 3.0); // (1+2+6)/3
        assert_eq!(forest.predict(&[1.0]).unwrap(), 20.0); // (10+20+30)/3
    }

    #[test]
    fn identical_stumps_collapse_to_the_stump() {
        let stump = TreeNode::Split {
            feature: 0,
            threshold: 0.0,
            left: Box::new(TreeNode::Leaf { value: -1.5 }),
            right: Box::new(TreeNode::Leaf { value: 2.5 }),
        };
        let forest = RandomForestRegressor {
            n_features: 1,
            params: ForestParams::default(),
            trees: vec![stump.clone(), stump.clone(), stump],
        };
        assert_eq!(forest.predict(&[-3.0]).unwrap(), -1.5);
        assert_eq!(forest.predict(&[3.0]).unwrap(), 2.5);
    }

    #[test]
    fn prediction_is_invariant_under_tree_order() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i % 10) as f64]).collect();
        let y: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let forest = RandomForestRegressor::fit(&x, &y, ForestParams::default(), 17).unwrap();
        let mut reversed = forest.clone();
        reversed.trees.reverse();
        for i in 0..20 {
            let q = [i as f64 * 4.9, (i % 10) as f64];
            assert!((forest.predict(&q).unwrap() - reversed.predict(&q).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_data_and_dimension_mismatch_are_errors() {
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(RandomForestRegressor::fit(&empty, &[], ForestParams::default(), 0).is_err());

        let x = vec![vec![1.0, 2.0]];
        let forest = RandomForestRegressor::fit(&x, &[1.0], ForestParams::default(), 0).unwrap();
        assert!(forest.predict(&[1.0]).is_err());
    }

    #[test]
    fn fit_is_deterministic_in_the_seed() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, (i * 3 % 11) as f64]).collect();
        let y: Vec<f64> = (0..60).map(|i| (i % 7) as f64).collect();
        let a = RandomForestRegressor::fit(&x, &y, ForestParams::default(), 5).unwrap();
        let b = RandomForestRegressor::fit(&x, &y, ForestParams::default(), 5).unwrap();
        assert_eq!(a, b);
    }
}
