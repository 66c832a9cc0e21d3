//! VLAD aggregation of point features against a codebook.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::kmeans::VladCodebook;

/// A pooled global descriptor: per-codeword residual sums, concatenated to
/// `k·d` values, signed-square-rooted, then L2-normalized. `degenerate` is
/// set when every residual was exactly zero (the vector then stays zero
/// instead of being normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct VladVector {
    values: DVector<f64>,
    degenerate: bool,
}

impl VladVector {
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn distance(&self, other: &VladVector) -> f64 {
        (&self.values - &other.values).norm()
    }

    pub(crate) fn from_parts(values: DVector<f64>, degenerate: bool) -> Self {
        Self { values, degenerate }
    }
}

/// Aggregates `features` (one per row) into a VLAD vector: hard-assign each
/// feature to its nearest codeword (ties → lower index), sum the residuals
/// per codeword, concatenate, signed-sqrt, L2-normalize.
pub fn compute_vlad(codebook: &VladCodebook, features: &DMatrix<f64>) -> Result<VladVector> {
    if features.nrows() == 0 {
        return Err(Error::InvalidCloud("VLAD needs a nonempty feature set".into()));
    }
    if features.ncols() != codebook.dim() {
        return Err(Error::DimensionMismatch { expected: codebook.dim(), got: features.ncols() });
    }
    let k = codebook.k();
    let d = codebook.dim();
    let mut values: DVector<f64> = DVector::zeros(k * d);
    for i in 0..features.nrows() {
        let feature = features.row(i).transpose();
        let (assigned, _) = codebook.assign(&feature);
        for j in 0..d {
            values[assigned * d + j] += feature[j] - codebook.centroids()[(assigned, j)];
        }
    }

    for x in values.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
    let norm = values.norm();
    if norm <= 0.0 {
        return Ok(VladVector { values, degenerate: true });
    }
    values /= norm;
    Ok(VladVector { values, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::kmeans::fit_codebook;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_features(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0))
    }

    /// Plain re-implementation: per-point nearest centroid by linear scan,
    /// residual accumulation in nested loops, then the same normalizations.
    fn reference_vlad(codebook: &VladCodebook, features: &DMatrix<f64>) -> Vec<f64> {
        let k = codebook.k();
        let d = codebook.dim();
        let mut acc = vec![0.0; k * d];
        for i in 0..features.nrows() {
            let mut best = 0;
            let mut best_d2 = f64::INFINITY;
            for c in 0..k {
                let mut d2 = 0.0;
                for j in 0..d {
                    let diff = features[(i, j)] - codebook.centroids()[(c, j)];
                    d2 += diff * diff;
                }
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = c;
                }
            }
            for j in 0..d {
                acc[best * d + j] += features[(i, j)] - codebook.centroids()[(best, j)];
            }
        }
        for x in acc.iter_mut() {
            *x = if *x >= 0.0 { x.sqrt() } else { -(-*x).sqrt() };
        }
        let norm: f64 = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in acc.iter_mut() {
                *x /= norm;
            }
        }
        acc
    }

    #[test]
    fn k1_prenormalization_equals_scaled_mean_offset() {
        // A fitted k = 1 centroid would equal the mean and make both sides
        // pure rounding noise, so pin an arbitrary centroid instead.
        let features = random_features(120, 6, 1);
        let centroid = DMatrix::from_row_slice(1, 6, &[0.3, -0.7, 1.1, 0.0, -0.2, 0.5]);
        let codebook = VladCodebook::from_parts(centroid.clone(), 0.0, 0, 0);
        let n = features.nrows() as f64;
        let vlad = compute_vlad(&codebook, &features).unwrap();

        // Oracle: pre-normalization sum is N · (mean − centroid); push it
        // through the same signed-sqrt + L2 steps for comparison.
        let mut expected: DVector<f64> = DVector::zeros(6);
        for j in 0..6 {
            let mean = features.column(j).sum() / n;
            expected[j] = n * (mean - centroid[(0, j)]);
        }
        for x in expected.iter_mut() {
            *x = x.signum() * x.abs().sqrt();
        }
        expected /= expected.norm();
        for j in 0..6 {
            assert!((vlad.values()[j] - expected[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn k10_matches_naive_residual_summation() {
        let features = random_features(400, 8, 7);
        let codebook = fit_codebook(&features, 10, 3).unwrap();
        let vlad = compute_vlad(&codebook, &features).unwrap();
        let reference = reference_vlad(&codebook, &features);
        assert_eq!(vlad.len(), 80);
        for j in 0..vlad.len() {
            assert!((vlad.values()[j] - reference[j]).abs() < 1e-9, "component {j}");
        }
    }

    #[test]
    fn output_is_unit_norm() {
        for seed in 0..5 {
            let features = random_features(150, 5, seed);
            let codebook = fit_codebook(&features, 4, seed).unwrap();
            let vlad = compute_vlad(&codebook, &features).unwrap();
            assert!((vlad.values().norm() - 1.0).abs() < 1e-9);
            assert!(!vlad.is_degenerate());
        }
    }

    #[test]
    fn features_equal_to_codewords_give_flagged_zero_vector() {
        let centroids = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let codebook = VladCodebook::from_parts(centroids.clone(), 0.0, 0, 0);
        // Features exactly equal to the codewords, repeated.
        let features = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        let vlad = compute_vlad(&codebook, &features).unwrap();
        assert!(vlad.is_degenerate());
        assert_eq!(vlad.values().norm(), 0.0);
    }

    #[test]
    fn changing_one_feature_touches_at_most_one_block() {
        let features = random_features(60, 4, 11);
        let codebook = fit_codebook(&features, 5, 2).unwrap();

        // Compare raw (pre-normalization) accumulations by recomputing both
        // sides without the nonlinear steps.
        let raw = |m: &DMatrix<f64>| {
            let mut acc = vec![0.0; 5 * 4];
            for i in 0..m.nrows() {
                let f = m.row(i).transpose();
                let (c, _) = codebook.assign(&f);
                for j in 0..4 {
                    acc[c * 4 + j] += f[j] - codebook.centroids()[(c, j)];
                }
            }
            acc
        };
        let mut modified = features.clone();
        modified[(17, 2)] += 0.35;
        let before = raw(&features);
        let after = raw(&modified);
        let changed_blocks: Vec<usize> = (0..5)
            .filter(|&c| (0..4).any(|j| before[c * 4 + j] != after[c * 4 + j]))
            .collect();
        assert!(changed_blocks.len() <= 2); // old block loses it, new gains it
        // When the assignment is unchanged, exactly one block differs.
        let f = features.row(17).transpose();
        let g = modified.row(17).transpose();
        if codebook.assign(&f).0 == codebook.assign(&g).0 {
            assert_eq!(changed_blocks.len(), 1);
        }
    }

    #[test]
    fn empty_or_mismatched_features_are_rejected() {
        let features = random_features(50, 4, 3);
        let codebook = fit_codebook(&features, 3, 1).unwrap();
        assert!(compute_vlad(&codebook, &DMatrix::zeros(0, 4)).is_err());
        assert!(matches!(
            compute_vlad(&codebook, &DMatrix::zeros(5, 7)),
            Err(Error::DimensionMismatch { expected: 4, got: 7 })
        ));
    }
}
