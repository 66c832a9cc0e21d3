//! Seeded k-means++ codebook fitting.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 300;
const MOVEMENT_TOL: f64 = 1e-6;

/// A fitted VLAD codebook: `k` centroids of dimension `d`, plus fit
/// metadata. Centroids are pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct VladCodebook {
    /// One centroid per row.
    centroids: DMatrix<f64>,
    inertia: f64,
    iterations: usize,
    seed: u64,
}

impl VladCodebook {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    /// Centroids as rows.
    pub fn centroids(&self) -> &DMatrix<f64> {
        &self.centroids
    }

    /// Final sum of squared distances to assigned centroids.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn from_parts(
        centroids: DMatrix<f64>,
        inertia: f64,
        iterations: usize,
        seed: u64,
    ) -> Self {
        Self { centroids, inertia, iterations, seed }
    }

    /// Index of the nearest centroid (ties → lower index) and its squared
    /// distance.
    pub fn assign(&self, feature: &DVector<f64>) -> (usize, f64) {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for c in 0..self.k() {
            let mut d2 = 0.0;
            for j in 0..self.dim() {
                let diff = feature[j] - self.centroids[(c, j)];
                d2 += diff * diff;
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
            }
        }
        (best, best_d2)
    }
}

/// Fits `k` centroids on `samples` (one feature per row) with seeded
/// k-means++ initialization and Lloyd iterations (at most 300, stopping when
/// the largest centroid movement drops below 1e-6).
pub fn fit_codebook(samples: &DMatrix<f64>, k: usize, seed: u64) -> Result<VladCodebook> {
    let (n, d) = samples.shape();
    if k == 0 {
        return Err(Error::InvalidConfig("codebook size k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::InsufficientSamples { needed: k, got: n });
    }
    if distinct_rows(samples) < k {
        return Err(Error::Degenerate(format!(
            "k-means needs at least {k} distinct samples, found fewer"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(samples, k, &mut rng);

    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    let mut inertia = assign_all(samples, &centroids, &mut assignments);
    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let mut sums: DMatrix<f64> = DMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for j in 0..d {
                sums[(a, j)] += samples[(i, j)];
            }
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its previous centroid
            }
            let inv = 1.0 / counts[c] as f64;
            let mut delta2 = 0.0;
            for j in 0..d {
                let new = sums[(c, j)] * inv;
                let diff = new - centroids[(c, j)];
                delta2 += diff * diff;
                centroids[(c, j)] = new;
            }
            movement = movement.max(delta2.sqrt());
        }
        inertia = assign_all(samples, &centroids, &mut assignments);
        if movement < MOVEMENT_TOL {
            break;
        }
    }

    for a in 0..k {
        for b in a + 1..k {
            let d2: f64 = (0..d).map(|j| (centroids[(a, j)] - centroids[(b, j)]).powi(2)).sum();
            if d2.sqrt() <= 1e-9 {
                return Err(Error::Degenerate(format!("centroids {a} and {b} collapsed together")));
            }
        }
    }

    Ok(VladCodebook { centroids, inertia, iterations, seed })
}

fn distinct_rows(samples: &DMatrix<f64>) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(samples.nrows());
    for i in 0..samples.nrows() {
        let key: Vec<u64> = samples.row(i).iter().map(|x| x.to_bits()).collect();
        seen.insert(key);
    }
    seen.len()
}

/// k-means++: first centroid uniform, then each next sample drawn with
/// probability proportional to its squared distance from the closest centroid
/// chosen so far.
fn plus_plus_init(samples: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = samples.nrows();
    let d = samples.ncols();
    let mut centroids = DMatrix::zeros(k, d);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    centroids.row_mut(0).copy_from(&samples.row(chosen[0]));

    let mut min_d2 = vec![f64::INFINITY; n];
    for c in 1..k {
        let last = centroids.row(c - 1);
        for i in 0..n {
            let mut d2 = 0.0;
            for j in 0..d {
                let diff = samples[(i, j)] - last[j];
                d2 += diff * diff;
            }
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
        let total: f64 = min_d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass on already-chosen points (duplicates);
            // deterministically take the first unchosen index.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut u = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        };
        chosen.push(next);
        centroids.row_mut(c).copy_from(&samples.row(next));
    }
    centroids
}

/// Reassigns every sample to its nearest centroid (ties → lower index) and
/// returns the inertia.
fn assign_all(samples: &DMatrix<f64>, centroids: &DMatrix<f64>, assignments: &mut [usize]) -> f64 {
    let (n, d) = samples.shape();
    let k = centroids.nrows();
    let mut inertia = 0.0;
    for i in 0..n {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for c in 0..k {
            let mut d2 = 0.0;
            for j in 0..d {
                let diff = samples[(i, j)] - centroids[(c, j)];
                d2 += diff * diff;
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
            }
        }
        assignments[i] = best;
        inertia += best_d2;
    }
    inertia
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;

    fn blob(center: &[f64], n: usize, spread: f64, rng: &mut StdRng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                center
                    .iter()
                    .map(|&c| c + rng.random_range(-spread..spread))
                    .collect()
            })
            .collect()
    }

    fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn k_equals_one_yields_sample_mean() {
        let mut rng = StdRng::seed_from_u64(3);
        let rows = blob(&[2.0, -1.0, 0.5], 80, 1.0, &mut rng);
        let samples = to_matrix(&rows);
        let codebook = fit_codebook(&samples, 1, 0).unwrap();
        for j in 0..3 {
            let mean = samples.column(j).sum() / samples.nrows() as f64;
            assert!((codebook.centroids()[(0, j)] - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn two_blobs_recover_blob_means() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut rows = blob(&[0.0, 0.0], 60, 0.5, &mut rng);
        rows.extend(blob(&[10.0, 10.0], 60, 0.5, &mut rng));
        let samples = to_matrix(&rows);
        let codebook = fit_codebook(&samples, 2, 1).unwrap();

        let separation = (2.0 * 100.0f64).sqrt();
        for center in [[0.0, 0.0], [10.0, 10.0]] {
            let closest = (0..2)
                .map(|c| {
                    ((codebook.centroids()[(c, 0)] - center[0]).powi(2)
                        + (codebook.centroids()[(c, 1)] - center[1]).powi(2))
                    .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(closest < 0.1 * separation, "blob {center:?} missed by {closest}");
        }
    }

    #[test]
    fn inertia_is_monotone_under_lloyd() {
        // Re-run the loop manually, tracking inertia after every update.
        let mut rng = StdRng::seed_from_u64(9);
        let mut rows = blob(&[0.0, 0.0, 0.0], 50, 2.0, &mut rng);
        rows.extend(blob(&[4.0, 1.0, -2.0], 50, 2.0, &mut rng));
        rows.extend(blob(&[-3.0, 5.0, 1.0], 50, 2.0, &mut rng));
        let samples = to_matrix(&rows);

        let mut chacha = ChaCha8Rng::seed_from_u64(4);
        let mut centroids = plus_plus_init(&samples, 3, &mut chacha);
        let mut assignments = vec![0usize; samples.nrows()];
        let mut last = assign_all(&samples, &centroids, &mut assignments);
        for _ in 0..50 {
            let mut sums: DMatrix<f64> = DMatrix::zeros(3, 3);
            let mut counts = [0usize; 3];
            for (i, &a) in assignments.iter().enumerate() {
                counts[a] += 1;
                for j in 0..3 {
                    sums[(a, j)] += samples[(i, j)];
                }
            }
            for c in 0..3 {
                if counts[c] > 0 {
                    for j in 0..3 {
                        centroids[(c, j)] = sums[(c, j)] / counts[c] as f64;
                    }
                }
            }
            let inertia = assign_all(&samples, &centroids, &mut assignments);
            assert!(inertia <= last + 1e-9, "inertia rose: {last} -> {inertia}");
            last = inertia;
        }
    }

    #[test]
    fn same_seed_reproduces_codebook_exactly() {
        let mut rng = StdRng::seed_from_u64(13);
        let rows = blob(&[1.0, 2.0, 3.0, 4.0], 120, 3.0, &mut rng);
        let samples = to_matrix(&rows);
        let a = fit_codebook(&samples, 5, 42).unwrap();
        let b = fit_codebook(&samples, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = fit_codebook(&samples, 5, 43).unwrap();
        assert!(a.centroids() != c.centroids());
    }

    #[test]
    fn too_few_distinct_samples_is_an_error() {
        let samples = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(fit_codebook(&samples, 3, 0), Err(Error::Degenerate(_))));
        assert!(matches!(
            fit_codebook(&samples, 5, 0),
            Err(Error::InsufficientSamples { needed: 5, got: 4 })
        ));
        assert!(fit_codebook(&samples, 2, 0).is_ok());
    }
}
