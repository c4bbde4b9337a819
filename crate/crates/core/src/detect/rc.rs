//! Regression clustering detector over COL features.
//!
//! Training (per serving cell): for every catalog cell `C`, cluster the rows
//! that observe `C` by the RSRP of `C`, then for every other catalog cell
//! `nC` fit one regression forest per cluster predicting the RSRP of `C`
//! from the RSRP columns of the remaining cells (everything except `C` and
//! `nC`).
//!
//! Evaluation runs two passes. Pass one computes the absolute prediction
//! residual for every `(C, nC)` pair and flags those above the threshold.
//! Pass two flags a row when, from the perspective of some `C`, exactly one
//! `nC` keeps the prediction accurate: removing the polluting cell restores
//! the prediction, so that lone accurate pair names the culprit.
//!
//! The graded anomaly score of a row is the largest second-smallest residual
//! across target cells, which upper-bounds the pass-two flag rate at any
//! cutoff and is what the calibration quantile works on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::ImputedMatrix;
use crate::ml::{ForestParams, KMeansModel, RandomForestRegressor};
use crate::scalar::Scalar;
use crate::sim::Pci;

use super::DetectError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RcParams {
    /// Clusters over the target RSRP.
    pub k: usize,
    /// A cell becomes a prediction target only if observed in at least this
    /// many training rows.
    pub min_records: usize,
    pub forest: ForestParams,
}

impl Default for RcParams {
    fn default() -> Self {
        Self {
            k: 4,
            min_records: 50,
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
struct RcPair<F: Scalar> {
    excluded_pci: Pci,
    /// Imputed input columns for this pair: every catalog column except the
    /// target and the excluded cell.
    x_columns: Vec<usize>,
    /// One forest per cluster; empty clusters stay unmodeled.
    forests: Vec<Option<RandomForestRegressor<F>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
struct RcTarget<F: Scalar> {
    pci: Pci,
    column: usize,
    clusters: KMeansModel<F>,
    pairs: Vec<RcPair<F>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RcVerdict {
    pub flagged: bool,
    pub culprit: Option<Pci>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct RegressionClusteringModel<F: Scalar> {
    catalog_pcis: Vec<Pci>,
    n_cols: usize,
    targets: Vec<RcTarget<F>>,
    /// Cells with too few observations to become targets.
    skipped_cells: Vec<Pci>,
    params: RcParams,
    #[serde(with = "crate::scalar::maybe_infinite")]
    threshold: F,
}

impl<F: Scalar> RegressionClusteringModel<F> {
    /// Fit on an imputed COL matrix whose neighbor columns follow
    /// `catalog_pcis` in ascending order after the two shared columns.
    pub fn fit(
        matrix: &ImputedMatrix,
        catalog_pcis: &[Pci],
        params: RcParams,
        seed: u64,
    ) -> Result<Self, DetectError> {
        if matrix.n_rows() == 0 {
            return Err(DetectError::EmptyTrainingData);
        }
        if catalog_pcis.len() < 3 {
            return Err(DetectError::TooFewColumns {
                needed: 3,
                got: catalog_pcis.len(),
            });
        }
        let mut catalog: Vec<Pci> = catalog_pcis.to_vec();
        catalog.sort_unstable();
        let n_cols = matrix.n_cols();
        if n_cols != 2 + catalog.len() {
            return Err(DetectError::DimensionMismatch {
                expected: 2 + catalog.len(),
                got: n_cols,
            });
        }

        let column_of = |idx: usize| 2 + idx;
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut targets = Vec::new();
        let mut skipped_cells = Vec::new();

        for (ci, &target_pci) in catalog.iter().enumerate() {
            let column = column_of(ci);
            let observed: Vec<usize> = (0..matrix.n_rows())
                .filter(|&r| !matrix.missing[r][column])
                .collect();
            if observed.len() < params.min_records.max(params.k) {
                skipped_cells.push(target_pci);
                continue;
            }

            let ys: Vec<Vec<F>> = observed
                .iter()
                .map(|&r| vec![F::from_f64_lossy(matrix.rows[r][column])])
                .collect();
            let clusters = KMeansModel::fit(&ys, params.k, master.gen())?;
            let assignment: Vec<usize> = ys.iter().map(|y| clusters.assign(y)).collect();

            let mut pairs = Vec::new();
            for (ni, &excluded_pci) in catalog.iter().enumerate() {
                if ni == ci {
                    continue;
                }
                let x_columns: Vec<usize> = (0..catalog.len())
                    .filter(|&i| i != ci && i != ni)
                    .map(column_of)
                    .collect();

                let mut forests = Vec::with_capacity(params.k);
                for cluster in 0..params.k {
                    let rows_in: Vec<usize> = observed
                        .iter()
                        .zip(&assignment)
                        .filter(|&(_, &a)| a == cluster)
                        .map(|(&r, _)| r)
                        .collect();
                    let forest_seed = master.gen();
                    if rows_in.is_empty() {
                        forests.push(None);
                        continue;
                    }
                    let x: Vec<Vec<F>> = rows_in
                        .iter()
                        .map(|&r| {
                            x_columns
                                .iter()
                                .map(|&c| F::from_f64_lossy(matrix.rows[r][c]))
                                .collect()
                        })
                        .collect();
                    let y: Vec<F> = rows_in
                        .iter()
                        .map(|&r| F::from_f64_lossy(matrix.rows[r][column]))
                        .collect();
                    forests.push(Some(RandomForestRegressor::fit(
                        &x,
                        &y,
                        params.forest,
                        forest_seed,
                    )?));
                }
                pairs.push(RcPair {
                    excluded_pci,
                    x_columns,
                    forests,
                });
            }
            targets.push(RcTarget {
                pci: target_pci,
                column,
                clusters,
                pairs,
            });
        }

        Ok(Self {
            catalog_pcis: catalog,
            n_cols,
            targets,
            skipped_cells,
            params,
            threshold: F::infinity(),
        })
    }

    pub fn threshold(&self) -> F {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: F) {
        self.threshold = threshold;
    }

    pub fn skipped_cells(&self) -> &[Pci] {
        &self.skipped_cells
    }

    pub fn n_pairs(&self) -> usize {
        self.targets.iter().map(|t| t.pairs.len()).sum()
    }

    pub fn n_forests(&self) -> usize {
        self.targets
            .iter()
            .flat_map(|t| &t.pairs)
            .flat_map(|p| &p.forests)
            .filter(|f| f.is_some())
            .count()
    }

    fn check_row(&self, values: &[f64]) -> Result<(), DetectError> {
        if values.len() != self.n_cols {
            return Err(DetectError::DimensionMismatch {
                expected: self.n_cols,
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Absolute prediction residuals per target cell, over every evaluable
    /// excluded cell. Targets missing from the row are skipped.
    fn residual_table(&self, values: &[f64], missing: &[bool]) -> Vec<(Pci, Vec<(Pci, F)>)> {
        let mut table = Vec::new();
        for target in &self.targets {
            if missing[target.column] {
                continue;
            }
            let y = F::from_f64_lossy(values[target.column]);
            let cluster = target.clusters.assign(&[y]);
            let mut residuals = Vec::new();
            for pair in &target.pairs {
                let Some(forest) = &pair.forests[cluster] else {
                    continue;
                };
                let x: Vec<F> = pair
                    .x_columns
                    .iter()
                    .map(|&c| F::from_f64_lossy(values[c]))
                    .collect();
                let prediction = forest.predict(&x).expect("columns fixed at fit time");
                residuals.push((pair.excluded_pci, (y - prediction).abs()));
            }
            if !residuals.is_empty() {
                table.push((target.pci, residuals));
            }
        }
        table
    }

    /// Two-pass verdict at the model threshold: flagged when some target
    /// cell sees exactly one accurate prediction, the excluded cell of that
    /// prediction being the culprit. Several targets vote by majority, ties
    /// to the lowest PCI.
    pub fn evaluate(&self, values: &[f64], missing: &[bool]) -> Result<RcVerdict, DetectError> {
        self.check_row(values)?;
        let mut votes: Vec<Pci> = Vec::new();
        for (_, residuals) in self.residual_table(values, missing) {
            let flags: Vec<(Pci, bool)> = residuals
                .iter()
                .map(|&(pci, r)| (pci, r > self.threshold))
                .collect();
            if let Some(culprit) = lone_accurate_cell(&flags) {
                votes.push(culprit);
            }
        }
        if votes.is_empty() {
            return Ok(RcVerdict {
                flagged: false,
                culprit: None,
            });
        }
        let mut counts: std::collections::BTreeMap<Pci, usize> = std::collections::BTreeMap::new();
        for v in votes {
            *counts.entry(v).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap();
        let culprit = counts
            .iter()
            .find(|(_, &c)| c == best)
            .map(|(&pci, _)| pci);
        Ok(RcVerdict {
            flagged: true,
            culprit,
        })
    }

    /// Graded anomaly score: the largest second-smallest residual over
    /// target cells. Rows offering fewer than two residuals for every
    /// target score zero.
    pub fn score(&self, values: &[f64], missing: &[bool]) -> Result<F, DetectError> {
        self.check_row(values)?;
        let mut best = F::zero();
        for (_, residuals) in self.residual_table(values, missing) {
            if residuals.len() < 2 {
                continue;
            }
            let mut rs: Vec<F> = residuals.iter().map(|&(_, r)| r).collect();
            rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if rs[1] > best {
                best = rs[1];
            }
        }
        Ok(best)
    }

    /// Calibrate the residual threshold so that at most `target_flag_rate`
    /// of the benign rows are flagged. The threshold is the conservative
    /// quantile of the graded scores, which bounds the two-pass flag rate:
    /// a row can only be flagged at cutoffs below its graded score.
    pub fn calibrate(&mut self, benign: &ImputedMatrix, target_flag_rate: f64) -> F {
        let scores: Vec<f64> = (0..benign.n_rows())
            .map(|r| {
                self.score(&benign.rows[r], &benign.missing[r])
                    .expect("calibration rows match the training layout")
                    .to_f64_lossy()
            })
            .collect();
        if scores.is_empty() {
            log::warn!("empty benign calibration set; threshold stays at infinity");
            self.threshold = F::infinity();
            return self.threshold;
        }
        let t = crate::eval::calibrate_threshold(&scores, target_flag_rate)
            .expect("non-empty scores");
        self.threshold = F::from_f64_lossy(t);
        self.threshold
    }
}

/// Pass two of the flag rule: `Some(cell)` when exactly one entry is
/// unflagged (an accurate prediction), `None` otherwise.
fn lone_accurate_cell(flags: &[(Pci, bool)]) -> Option<Pci> {
    let mut accurate = flags.iter().filter(|(_, flagged)| !flagged);
    match (accurate.next(), accurate.next()) {
        (Some(&(pci, _)), None) => Some(pci),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;
    use crate::features::{impute, ImputePolicy};

    fn quick_params(k: usize, min_records: usize) -> RcParams {
        // Exact-fit trees keep the noiseless world noiseless: every benign
        // residual is exactly zero, so the target-zero threshold is too.
        RcParams {
            k,
            min_records,
            forest: ForestParams {
                n_trees: 30,
                max_depth: 12,
                min_leaf: 1,
                bootstrap: false,
                ..ForestParams::default()
            },
        }
    }

    /// Noiseless world: cell j's value is `offset(cluster) + (j + 1) * s`
    /// for a shared latent `s` on an integer grid, so every cell is an exact
    /// function of any other cell within a cluster. Everything is integral,
    /// which keeps leaf means and forest averages exactly representable:
    /// benign residuals are exactly zero, not merely tiny.
    struct LinearWorld {
        pcis: Vec<Pci>,
        matrix: ImputedMatrix,
    }

    fn linear_world(n_cells: usize, offsets: &[f64], repeats: usize) -> LinearWorld {
        let pcis: Vec<Pci> = (1..=n_cells as u32).map(Pci).collect();
        let mut names = vec!["serving_rsrp".to_string(), "n_neighbors".to_string()];
        names.extend(pcis.iter().map(|p| format!("rsrp_pci{p}")));
        let mut feature_matrix = FeatureMatrix::with_columns(names);
        for &offset in offsets {
            for s in 0..5 {
                for _ in 0..repeats {
                    let mut row = vec![Some(-70.0), Some(n_cells as f64)];
                    for j in 0..n_cells {
                        let weight = (j + 1) as f64;
                        row.push(Some(offset + weight * s as f64));
                    }
                    feature_matrix.push_row(&row);
                }
            }
        }
        LinearWorld {
            pcis,
            matrix: impute(&feature_matrix, ImputePolicy::default()),
        }
    }

    #[test]
    fn pair_cardinality_is_catalog_size_times_one_less() {
        let world = linear_world(3, &[0.0, 64.0], 10);
        let model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&world.matrix, &world.pcis, quick_params(2, 10), 1)
                .unwrap();
        assert_eq!(model.n_pairs(), 3 * 2);
    }

    #[test]
    fn k_one_degenerates_to_one_forest_per_pair() {
        let world = linear_world(3, &[0.0], 12);
        let model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&world.matrix, &world.pcis, quick_params(1, 10), 2)
                .unwrap();
        assert_eq!(model.n_forests(), model.n_pairs());
    }

    #[test]
    fn noiseless_world_trains_to_near_zero_residuals() {
        let world = linear_world(5, &[0.0, 64.0], 8);
        let mut model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&world.matrix, &world.pcis, quick_params(2, 10), 3)
                .unwrap();
        let t = model.calibrate(&world.matrix, 0.0);
        // Calibrated at target zero: threshold above every benign residual
        // score, and tiny because the world is noiseless.
        assert!(t < 0.5, "threshold {t}");
        for r in 0..world.matrix.n_rows() {
            let verdict = model
                .evaluate(&world.matrix.rows[r], &world.matrix.missing[r])
                .unwrap();
            assert!(!verdict.flagged, "benign row {r} flagged");
        }
    }

    /// Replace one cell's value with the value it would have under a
    /// different latent state: plausible on its own, inconsistent with the
    /// rest of the row. This is the signature a relocated false cell leaves.
    fn corrupt(row: &mut [f64], cell_idx: usize, offset: f64, s: usize) {
        let fake_s = (s + 2) % 5;
        row[2 + cell_idx] = offset + (cell_idx + 1) as f64 * fake_s as f64;
    }

    #[test]
    fn corrupting_one_cell_names_it_as_culprit() {
        let offsets = [0.0, 64.0];
        let world = linear_world(5, &offsets, 8);
        let mut model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&world.matrix, &world.pcis, quick_params(2, 10), 4)
                .unwrap();
        model.calibrate(&world.matrix, 0.0);

        let mut hits = 0;
        let mut total = 0;
        for r in 0..world.matrix.n_rows() {
            let culprit_idx = r % 5;
            let s = (r / 8) % 5;
            let offset = offsets[r / 40];
            let mut row = world.matrix.rows[r].clone();
            corrupt(&mut row, culprit_idx, offset, s);
            total += 1;
            let verdict = model.evaluate(&row, &world.matrix.missing[r]).unwrap();
            if verdict.flagged && verdict.culprit == Some(world.pcis[culprit_idx]) {
                hits += 1;
            }
        }
        let ratio = hits as f64 / total as f64;
        assert!(ratio >= 0.95, "correct culprit on {ratio} of rows");
    }

    #[test]
    fn graded_score_separates_corrupted_rows() {
        let world = linear_world(5, &[0.0, 64.0], 8);
        let model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&world.matrix, &world.pcis, quick_params(2, 10), 5)
                .unwrap();
        let benign_max = (0..world.matrix.n_rows())
            .map(|r| {
                model
                    .score(&world.matrix.rows[r], &world.matrix.missing[r])
                    .unwrap()
            })
            .fold(0.0f64, f64::max);
        let mut row = world.matrix.rows[0].clone();
        corrupt(&mut row, 3, 0.0, 0);
        let corrupted = model.score(&row, &world.matrix.missing[0]).unwrap();
        assert!(corrupted > benign_max, "{corrupted} <= {benign_max}");
    }

    #[test]
    fn lone_accurate_cell_reads_the_flag_pattern() {
        let flags = |bits: &[u8]| -> Vec<(Pci, bool)> {
            bits.iter()
                .enumerate()
                .map(|(i, &b)| (Pci(i as u32 + 1), b == 1))
                .collect()
        };
        // Exactly one accurate prediction names the culprit.
        assert_eq!(lone_accurate_cell(&flags(&[1, 0, 1])), Some(Pci(2)));
        // Two accurate predictions: no verdict from this target.
        assert_eq!(lone_accurate_cell(&flags(&[0, 0, 1])), None);
        // Everything inaccurate: the target itself is polluted.
        assert_eq!(lone_accurate_cell(&flags(&[1, 1, 1])), None);
    }

    #[test]
    fn rows_missing_every_target_are_unflagged() {
        let world = linear_world(3, &[0.0], 12);
        let model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&world.matrix, &world.pcis, quick_params(1, 5), 6)
                .unwrap();
        let values = vec![0.0; world.matrix.n_cols()];
        let missing = vec![true; world.matrix.n_cols()];
        let verdict = model.evaluate(&values, &missing).unwrap();
        assert_eq!(
            verdict,
            RcVerdict {
                flagged: false,
                culprit: None
            }
        );
        assert_eq!(model.score(&values, &missing).unwrap(), 0.0);
    }

    #[test]
    fn under_observed_cells_are_skipped_and_recorded() {
        let world = linear_world(4, &[0.0], 10);
        // Blank out most observations of the last cell.
        let mut matrix = world.matrix.clone();
        for r in 0..matrix.n_rows() {
            if r % 10 != 0 {
                matrix.missing[r][2 + 3] = true;
            }
        }
        let model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&matrix, &world.pcis, quick_params(1, 20), 7).unwrap();
        assert_eq!(model.skipped_cells(), &[Pci(4)]);
        assert_eq!(model.n_pairs(), 3 * 3); // 3 targets x 3 excluded cells
    }

    #[test]
    fn catalog_below_three_cells_is_rejected() {
        let world = linear_world(2, &[0.0], 10);
        assert!(RegressionClusteringModel::<f64>::fit(
            &world.matrix,
            &world.pcis,
            quick_params(1, 5),
            0
        )
        .is_err());
    }

    #[test]
    fn calibration_respects_the_flag_budget() {
        let world = linear_world(5, &[0.0, 64.0, 128.0], 30);
        let mut model: RegressionClusteringModel<f64> =
            RegressionClusteringModel::fit(&world.matrix, &world.pcis, quick_params(3, 20), 8)
                .unwrap();
        for target in [0.0, 0.005, 0.05, 1.0] {
            model.calibrate(&world.matrix, target);
            let flagged = (0..world.matrix.n_rows())
                .filter(|&r| {
                    model
                        .evaluate(&world.matrix.rows[r], &world.matrix.missing[r])
                        .unwrap()
                        .flagged
                })
                .count();
            let budget = (world.matrix.n_rows() as f64 * target).floor() as usize;
            assert!(flagged <= budget, "target {target}: {flagged} > {budget}");
        }
    }
}
