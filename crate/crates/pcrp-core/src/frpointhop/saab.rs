//! The Saab transform: PCA with a constant-bias (DC) component split out.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;

/// How many spectral components a fitted kernel keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationRule {
    /// Keep the smallest component count whose cumulative energy fraction
    /// (DC included) reaches the threshold; keeps everything if it is never
    /// reached.
    EnergyThreshold(f64),
    /// Keep exactly this output dimension (DC plus `dim − 1` AC components),
    /// clamped to the available rank with a warning.
    TargetDim(usize),
}

/// A fitted Saab kernel.
///
/// The response to an attribute `x` is `[c·(x − μ); K·(x − μ)]` where `μ` is
/// the training mean, `c = 1/√d · 1` the DC direction, and the rows of `K`
/// are the retained principal components of the DC-removed centered training
/// samples, in non-increasing eigenvalue order.
///
/// The DC energy fraction is tracked separately from the AC fractions: the
/// AC list is non-increasing by construction, while the DC share can land
/// anywhere (it is exactly zero for attributes with a fixed coordinate sum,
/// such as percentage-normalized histograms).
#[derive(Debug, Clone, PartialEq)]
pub struct SaabKernel {
    mean: DVector<f64>,
    /// Retained AC kernels, one per row, each of length `d_in`.
    ac_kernels: DMatrix<f64>,
    dc_energy_fraction: f64,
    ac_energy_fractions: Vec<f64>,
    /// Rank of the training covariance: AC components with eigenvalue above
    /// the degeneracy cutoff, before truncation.
    full_rank: usize,
}

impl SaabKernel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Total output dimension: DC plus retained AC components.
    pub fn output_dim(&self) -> usize {
        1 + self.ac_kernels.nrows()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Retained AC kernels as rows.
    pub fn ac_kernels(&self) -> &DMatrix<f64> {
        &self.ac_kernels
    }

    pub fn dc_energy_fraction(&self) -> f64 {
        self.dc_energy_fraction
    }

    /// Energy fractions of the retained AC components, non-increasing.
    pub fn ac_energy_fractions(&self) -> &[f64] {
        &self.ac_energy_fractions
    }

    /// Cumulative energy fraction captured by the retained components.
    pub fn retained_energy_fraction(&self) -> f64 {
        self.dc_energy_fraction + self.ac_energy_fractions.iter().sum::<f64>()
    }

    pub(crate) fn from_parts(
        mean: DVector<f64>,
        ac_kernels: DMatrix<f64>,
        dc_energy_fraction: f64,
        ac_energy_fractions: Vec<f64>,
        full_rank: usize,
    ) -> Self {
        Self { mean, ac_kernels, dc_energy_fraction, ac_energy_fractions, full_rank }
    }

    pub(crate) fn full_rank(&self) -> usize {
        self.full_rank
    }

    /// A copy truncated to `rule`. The kernel must hold every component the
    /// rule asks for, so this is normally called on a full-rank fit.
    pub fn truncated(&self, rule: TruncationRule) -> SaabKernel {
        let keep_ac = match rule {
            TruncationRule::EnergyThreshold(threshold) => {
                let mut cumulative = self.dc_energy_fraction;
                let mut keep = self.ac_kernels.nrows();
                if cumulative >= threshold {
                    keep = 0;
                } else {
                    for (i, e) in self.ac_energy_fractions.iter().enumerate() {
                        cumulative += e;
                        if cumulative >= threshold {
                            keep = i + 1;
                            break;
                        }
                    }
                }
                keep
            }
            TruncationRule::TargetDim(dim) => {
                let want = dim.saturating_sub(1);
                if want > self.ac_kernels.nrows() {
                    tracing::warn!(
                        requested = dim,
                        available = self.output_dim(),
                        "Saab truncation target exceeds covariance rank; keeping all components"
                    );
                }
                want.min(self.ac_kernels.nrows())
            }
        };
        SaabKernel {
            mean: self.mean.clone(),
            ac_kernels: self.ac_kernels.rows(0, keep_ac).into_owned(),
            dc_energy_fraction: self.dc_energy_fraction,
            ac_energy_fractions: self.ac_energy_fractions[..keep_ac].to_vec(),
            full_rank: self.full_rank,
        }
    }

    /// Spectral response of a single attribute vector.
    pub fn apply(&self, attribute: &DVector<f64>) -> Result<DVector<f64>> {
        if attribute.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: attribute.len() });
        }
        let centered = attribute - &self.mean;
        let mut out = DVector::zeros(self.output_dim());
        out[0] = centered.sum() / (self.input_dim() as f64).sqrt();
        out.rows_mut(1, self.ac_kernels.nrows()).copy_from(&(&self.ac_kernels * &centered));
        Ok(out)
    }

    /// Spectral responses of a batch, one sample per row.
    pub fn apply_rows(&self, attributes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if attributes.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: attributes.ncols() });
        }
        let n = attributes.nrows();
        let mut out = DMatrix::zeros(n, self.output_dim());
        let inv_sqrt_d = 1.0 / (self.input_dim() as f64).sqrt();
        for i in 0..n {
            let centered = attributes.row(i).transpose() - &self.mean;
            out[(i, 0)] = centered.sum() * inv_sqrt_d;
            out.view_mut((i, 1), (1, self.ac_kernels.nrows()))
                .copy_from(&(&self.ac_kernels * centered).transpose());
        }
        Ok(out)
    }
}

/// Eigenvalues at or below this count as numerically zero variance.
const RANK_EPS: f64 = 1e-12;

/// Fits a Saab kernel on `samples` (one attribute vector per row) and
/// truncates it per `rule`.
pub fn fit_saab(samples: &DMatrix<f64>, rule: TruncationRule) -> Result<SaabKernel> {
    Ok(fit_saab_full(samples)?.truncated(rule))
}

/// Fits with every rank-positive component retained. Energy fractions are
/// relative to the total centered sample energy, so they sum to 1 (DC
/// included) up to the discarded numerically-zero tail.
pub fn fit_saab_full(samples: &DMatrix<f64>) -> Result<SaabKernel> {
    let (n, d) = samples.shape();
    if n < d + 1 {
        return Err(Error::InsufficientSamples { needed: d + 1, got: n });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite attribute sample".into()));
    }

    let mean = samples.row_mean().transpose();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let total_energy = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if total_energy <= RANK_EPS {
        // All samples identical: only the (zero-energy) DC survives.
        return Ok(SaabKernel {
            mean,
            ac_kernels: DMatrix::zeros(0, d),
            dc_energy_fraction: 0.0,
            ac_energy_fractions: Vec::new(),
            full_rank: 0,
        });
    }

    // DC responses on centered samples, then deflate the DC direction.
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let dc_responses: Vec<f64> = (0..n).map(|i| centered.row(i).sum() * inv_sqrt_d).collect();
    let dc_energy = dc_responses.iter().map(|r| r * r).sum::<f64>() / n as f64;
    for (i, &r) in dc_responses.iter().enumerate() {
        for j in 0..d {
            centered[(i, j)] -= r * inv_sqrt_d;
        }
    }

    let covariance = centered.transpose() * &centered / n as f64;
    let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(covariance);

    let rank = eigenvalues.iter().take_while(|&&v| v > RANK_EPS).count();
    let mut ac_kernels = DMatrix::zeros(rank, d);
    for i in 0..rank {
        ac_kernels.row_mut(i).copy_from(&eigenvectors.column(i).transpose());
    }
    let ac_energy_fractions: Vec<f64> = eigenvalues[..rank].iter().map(|v| v / total_energy).collect();

    Ok(SaabKernel {
        mean,
        ac_kernels,
        dc_energy_fraction: dc_energy / total_energy,
        ac_energy_fractions,
        full_rank: rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn gaussian_samples(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        // Anisotropic: scale column j by (j + 1), then mix mildly.
        DMatrix::from_fn(n, d, |_, j| {
            let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            z * (j + 1) as f64
        })
    }

    #[test]
    fn identical_samples_keep_only_dc() {
        let samples = DMatrix::from_fn(10, 4, |_, j| j as f64 + 1.0);
        let kernel = fit_saab(&samples, TruncationRule::EnergyThreshold(0.95)).unwrap();
        assert_eq!(kernel.output_dim(), 1);
        assert_eq!(kernel.dc_energy_fraction(), 0.0);
        let out = kernel.apply(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].abs() < 1e-12);
    }

    #[test]
    fn two_dim_ac_kernel_is_antidiagonal_direction() {
        // Samples vary along (1,-1)/√2 only; that direction is orthogonal to
        // DC = (1,1)/√2, so the sole AC kernel must be ±(1,-1)/√2, with the
        // canonical sign keeping the first component positive.
        let ts = [-2.0, -1.0, 0.5, 1.0, 2.5, -0.5, 1.5];
        let samples = DMatrix::from_fn(ts.len(), 2, |i, j| {
            let base = [3.0, 5.0];
            let dir = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
            base[j] + ts[i] * dir[j]
        });
        let kernel = fit_saab(&samples, TruncationRule::EnergyThreshold(1.0)).unwrap();
        assert_eq!(kernel.output_dim(), 2);
        let k = kernel.ac_kernels().row(0);
        assert!((k[0] - 1.0 / 2f64.sqrt()).abs() < 1e-9);
        assert!((k[1] + 1.0 / 2f64.sqrt()).abs() < 1e-9);
        // Those samples have zero DC variation.
        assert!(kernel.dc_energy_fraction() < 1e-12);
    }

    #[test]
    fn ac_kernels_match_independent_eigen_solve() {
        let samples = gaussian_samples(400, 6, 5);
        let kernel = fit_saab(&samples, TruncationRule::EnergyThreshold(1.0)).unwrap();

        // Straightforward reference: center, project out the DC direction,
        // then eigen-decompose the covariance assembled by explicit loops.
        let n = samples.nrows();
        let d = samples.ncols();
        let mean: Vec<f64> = (0..d).map(|j| samples.column(j).sum() / n as f64).collect();
        let dc: Vec<f64> = vec![1.0 / (d as f64).sqrt(); d];
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut r: Vec<f64> = (0..d).map(|j| samples[(i, j)] - mean[j]).collect();
            let proj: f64 = r.iter().zip(&dc).map(|(a, b)| a * b).sum();
            for (x, c) in r.iter_mut().zip(&dc) {
                *x -= proj * c;
            }
            rows.push(r);
        }
        let mut cov: DMatrix<f64> = DMatrix::zeros(d, d);
        for r in &rows {
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += r[a] * r[b] / n as f64;
                }
            }
        }
        let eigen = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

        // One eigenvalue is ~0 (the deflated DC direction); compare the rest.
        assert_eq!(kernel.ac_kernels().nrows(), d - 1);
        for (i, &col) in order[..d - 1].iter().enumerate() {
            let reference = eigen.eigenvectors.column(col);
            let ours = kernel.ac_kernels().row(i).transpose();
            let dot: f64 = reference.dot(&ours);
            assert!((dot.abs() - 1.0).abs() < 1e-6, "component {i}: |dot| = {}", dot.abs());
        }
    }

    #[test]
    fn response_at_mean_is_zero_and_map_is_affine() {
        let samples = gaussian_samples(200, 5, 9);
        let kernel = fit_saab(&samples, TruncationRule::EnergyThreshold(1.0)).unwrap();

        let at_mean = kernel.apply(&kernel.mean().clone()).unwrap();
        assert!(at_mean.amax() < 1e-12);

        let a = DVector::from_vec(vec![0.3, -1.2, 0.7, 2.0, -0.4]);
        let b = DVector::from_vec(vec![1.1, 0.2, -0.9, 0.5, 1.3]);
        let zero = DVector::zeros(5);
        let lhs = kernel.apply(&(&a + &b)).unwrap() - kernel.apply(&a).unwrap()
            - kernel.apply(&b).unwrap()
            + kernel.apply(&zero).unwrap();
        assert!(lhs.amax() < 1e-9);
    }

    #[test]
    fn batch_matches_single_sample_application() {
        let samples = gaussian_samples(150, 7, 13);
        let kernel = fit_saab(&samples, TruncationRule::TargetDim(5)).unwrap();
        let batch = kernel.apply_rows(&samples).unwrap();
        for i in 0..samples.nrows() {
            let single = kernel.apply(&samples.row(i).transpose()).unwrap();
            for j in 0..kernel.output_dim() {
                assert!((batch[(i, j)] - single[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_retention_preserves_energy_and_orthonormality() {
        let samples = gaussian_samples(300, 8, 21);
        let kernel = fit_saab(&samples, TruncationRule::EnergyThreshold(1.0)).unwrap();

        // Parseval: spectral energy equals centered attribute energy.
        let spectral = kernel.apply_rows(&samples).unwrap();
        let spectral_energy: f64 = spectral.iter().map(|x| x * x).sum();
        let mut centered_energy = 0.0;
        for i in 0..samples.nrows() {
            let c = samples.row(i).transpose() - kernel.mean();
            centered_energy += c.norm_squared();
        }
        assert!((spectral_energy - centered_energy).abs() / centered_energy < 1e-6);

        // Energy fractions: non-increasing AC list, total ≈ 1 with DC.
        let fractions = kernel.ac_energy_fractions();
        for w in fractions.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        let total: f64 = kernel.dc_energy_fraction() + fractions.iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-6, "fraction total {total}");

        // AC kernels orthonormal and orthogonal to the DC direction.
        let k = kernel.ac_kernels();
        let gram = k * k.transpose();
        assert!((gram - DMatrix::identity(k.nrows(), k.nrows())).abs().max() < 1e-6);
        let dc = DVector::from_element(8, 1.0 / 8f64.sqrt());
        for row in k.row_iter() {
            assert!(row.transpose().dot(&dc).abs() < 1e-6);
        }
    }

    #[test]
    fn energy_threshold_keeps_smallest_sufficient_count() {
        let samples = gaussian_samples(300, 6, 33);
        let full = fit_saab_full(&samples).unwrap();
        let threshold = 0.6;
        let kernel = full.truncated(TruncationRule::EnergyThreshold(threshold));

        let kept = kernel.ac_kernels().nrows();
        let cumulative = |m: usize| {
            full.dc_energy_fraction() + full.ac_energy_fractions()[..m].iter().sum::<f64>()
        };
        assert!(cumulative(kept) >= threshold);
        if kept > 0 {
            assert!(cumulative(kept - 1) < threshold);
        }
    }

    #[test]
    fn target_dim_truncation_is_exact_and_clamped() {
        let samples = gaussian_samples(100, 5, 41);
        let kernel = fit_saab(&samples, TruncationRule::TargetDim(3)).unwrap();
        assert_eq!(kernel.output_dim(), 3);
        // Requesting more than rank clamps (rank here is 4 after DC removal).
        let clamped = fit_saab(&samples, TruncationRule::TargetDim(50)).unwrap();
        assert_eq!(clamped.output_dim(), 5);
    }

    #[test]
    fn insufficient_or_non_finite_samples_are_rejected() {
        let samples = DMatrix::zeros(4, 6);
        assert!(matches!(
            fit_saab(&samples, TruncationRule::TargetDim(2)),
            Err(Error::InsufficientSamples { needed: 7, got: 4 })
        ));
        let mut bad = gaussian_samples(20, 3, 1);
        bad[(5, 1)] = f64::NAN;
        assert!(fit_saab(&bad, TruncationRule::TargetDim(2)).is_err());
    }
}
