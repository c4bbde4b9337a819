use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::MlError;

/// Fitted k-means model. Assignment maps a point to its nearest centroid,
/// ties going to the lowest index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct KMeansModel<F: Scalar> {
    centroids: Vec<Vec<F>>,
}

fn sq_dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

impl<F: Scalar> KMeansModel<F> {
    /// Lloyd iterations from a k-means++ seeding, run to the assignment
    /// fixpoint or at most `max_iter` rounds.
    pub fn fit(points: &[Vec<F>], k: usize, seed: u64) -> Result<Self, MlError> {
        Ok(Self::fit_with_trace(points, k, seed)?.0)
    }

    /// Like [`KMeansModel::fit`] but also returns the within-cluster sum of
    /// squares after every assignment step, which is non-increasing.
    pub fn fit_with_trace(
        points: &[Vec<F>],
        k: usize,
        seed: u64,
    ) -> Result<(Self, Vec<F>), MlError> {
        const MAX_ITER: usize = 100;
        if k == 0 {
            return Err(MlError::TooFewPoints { needed: 1, got: 0 });
        }
        if points.len() < k {
            return Err(MlError::TooFewPoints {
                needed: k,
                got: points.len(),
            });
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(MlError::DimensionMismatch {
                expected: dim,
                got: points.iter().map(Vec::len).find(|&l| l != dim).unwrap(),
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = plus_plus_seeding(points, k, &mut rng);

        let mut assignment = vec![usize::MAX; points.len()];
        let mut trace = Vec::new();
        for _ in 0..MAX_ITER {
            let mut changed = false;
            let mut wcss = F::zero();
            for (i, p) in points.iter().enumerate() {
                let (best, d) = nearest(p, &centroids);
                wcss = wcss + d;
                if assignment[i] != best {
                    assignment[i] = best;
                    changed = true;
                }
            }
            trace.push(wcss);
            if !changed {
                break;
            }

            let mut sums = vec![vec![F::zero(); dim]; k];
            let mut counts = vec![0usize; k];
            for (p, &a) in points.iter().zip(&assignment) {
                counts[a] += 1;
                for (s, &v) in sums[a].iter_mut().zip(p) {
                    *s = *s + v;
                }
            }
            for ((c, sum), count) in centroids.iter_mut().zip(sums).zip(counts) {
                // An emptied cluster keeps its previous centroid.
                if count > 0 {
                    let n = F::from_f64_lossy(count as f64);
                    *c = sum.into_iter().map(|s| s / n).collect();
                }
            }
        }

        Ok((Self { centroids }, trace))
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[Vec<F>] {
        &self.centroids
    }

    /// Index of the nearest centroid; ties break to the lowest index.
    pub fn assign(&self, point: &[F]) -> usize {
        nearest(point, &self.centroids).0
    }
}

fn nearest<F: Scalar>(point: &[F], centroids: &[Vec<F>]) -> (usize, F) {
    let mut best = 0;
    let mut best_d = sq_dist(point, &centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    (best, best_d)
}

/// k-means++: first centroid uniform, every further one drawn with
/// probability proportional to the squared distance from the chosen set.
fn plus_plus_seeding<F: Scalar>(points: &[Vec<F>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<F>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());

    let mut dists: Vec<F> = points
        .iter()
        .map(|p| sq_dist(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total = dists.iter().fold(F::zero(), |a, &d| a + d);
        let next = if total > F::zero() {
            let mut r = rng.gen_range(F::zero()..total);
            let mut chosen = points.len() - 1;
            for (i, &d) in dists.iter().enumerate() {
                if r < d {
                    chosen = i;
                    break;
                }
                r = r - d;
            }
            chosen
        } else {
            // All remaining points coincide with a centroid.
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (d, p) in dists.iter_mut().zip(points) {
            let nd = sq_dist(p, centroids.last().unwrap());
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}
