//! Two-hop FR-PointHop model fitting and feature extraction.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::descriptors::compute_lrf_field;
use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sample, PointCloud};

use super::attributes::{hop1_attributes, hop2_attributes};
use super::saab::{fit_saab_full, SaabKernel, TruncationRule};

/// Hyper-parameters of the two-hop feature learner.
#[derive(Debug, Clone, PartialEq)]
pub struct HopConfig {
    /// Hop-1 neighborhood: FPFH, normals, and LRF estimation.
    pub k1: usize,
    /// Hop-2 octant-pooling neighborhood on the downsampled cloud.
    pub k2: usize,
    /// Fraction of points FPS keeps between hops.
    pub fps_ratio: f64,
    /// Cumulative energy kept by the hop-1 Saab truncation.
    pub hop1_energy_threshold: f64,
    /// Final per-point feature dimension (hop-2 output).
    pub target_dim: usize,
    /// Upper bound on attribute rows pooled per cloud when fitting.
    pub train_points_cap: usize,
}

impl Default for HopConfig {
    fn default() -> Self {
        Self {
            k1: 64,
            k2: 32,
            fps_ratio: 0.5,
            hop1_energy_threshold: 0.95,
            target_dim: 200,
            train_points_cap: 2000,
        }
    }
}

impl HopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k1 < 8 || self.k2 < 8 {
            return Err(Error::InvalidConfig(format!(
                "neighborhood sizes must be >= 8 (k1 = {}, k2 = {})",
                self.k1, self.k2
            )));
        }
        if self.target_dim < 1 {
            return Err(Error::InvalidConfig("target feature dimension must be >= 1".into()));
        }
        if !(self.fps_ratio > 0.0 && self.fps_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("fps_ratio {} outside (0, 1]", self.fps_ratio)));
        }
        if !(self.hop1_energy_threshold > 0.0 && self.hop1_energy_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "hop1_energy_threshold {} outside (0, 1]",
                self.hop1_energy_threshold
            )));
        }
        if self.train_points_cap == 0 {
            return Err(Error::InvalidConfig("train_points_cap must be >= 1".into()));
        }
        Ok(())
    }

    fn retained_count(&self, n: usize) -> usize {
        ((n as f64 * self.fps_ratio).ceil() as usize).clamp(1, n)
    }
}

/// A fitted two-hop model. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FrPointHopModel {
    config: HopConfig,
    hop1: SaabKernel,
    hop2: SaabKernel,
}

/// Per-point features for one cloud: one row per FPS-retained point, plus
/// the indices those rows correspond to in the original cloud.
#[derive(Debug, Clone)]
pub struct PointFeatureSet {
    features: DMatrix<f64>,
    retained: Vec<usize>,
}

impl PointFeatureSet {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Row-per-point feature matrix.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Indices into the original cloud, parallel to the feature rows.
    pub fn retained_indices(&self) -> &[usize] {
        &self.retained
    }
}

impl FrPointHopModel {
    pub fn config(&self) -> &HopConfig {
        &self.config
    }

    pub fn hop1_kernel(&self) -> &SaabKernel {
        &self.hop1
    }

    pub fn hop2_kernel(&self) -> &SaabKernel {
        &self.hop2
    }

    /// Actual per-point feature dimension (equals `config.target_dim` unless
    /// the training data had insufficient rank).
    pub fn feature_dim(&self) -> usize {
        self.hop2.output_dim()
    }

    pub(crate) fn from_parts(config: HopConfig, hop1: SaabKernel, hop2: SaabKernel) -> Self {
        Self { config, hop1, hop2 }
    }
}

/// Fits the two Saab kernels on pooled attributes from `training_clouds`.
///
/// Hop 1 pools FPFH rows across clouds and truncates by the configured
/// energy threshold, floored at ⌈target_dim / 8⌉ components so the hop-2
/// attribute space (8 channels per octant) stays wide enough to reach the
/// target dimension. Hop 2 pools octant attributes from the FPS-retained
/// half of each cloud and truncates to exactly `target_dim`.
///
/// Per-cloud pooling draws at most `train_points_cap` rows, chosen by a
/// ChaCha8 stream seeded from `seed`, so fitting is deterministic.
pub fn fit_model(
    training_clouds: &[PointCloud],
    config: &HopConfig,
    seed: u64,
) -> Result<FrPointHopModel> {
    config.validate()?;
    if training_clouds.is_empty() {
        return Err(Error::InvalidConfig("model fitting needs at least one training cloud".into()));
    }
    for cloud in training_clouds {
        check_cloud_size(cloud, config)?;
    }

    // Hop 1: pooled FPFH attributes.
    let hop1_rows: Vec<DMatrix<f64>> = training_clouds
        .iter()
        .map(|cloud| hop1_attributes(cloud, config.k1))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pooled1 = pool_rows(&hop1_rows, config.train_points_cap, &mut rng);
    let hop1_full = fit_saab_full(&pooled1)?;
    let mut hop1 = hop1_full.truncated(TruncationRule::EnergyThreshold(config.hop1_energy_threshold));
    let min_d1 = config.target_dim.div_ceil(8);
    if hop1.output_dim() < min_d1 {
        hop1 = hop1_full.truncated(TruncationRule::TargetDim(min_d1));
        if hop1.output_dim() < min_d1 {
            tracing::warn!(
                needed = min_d1,
                got = hop1.output_dim(),
                "hop-1 rank too low for the target feature dimension"
            );
        }
    }

    // Hop 2: pooled octant attributes over the FPS-retained subclouds.
    let hop2_rows: Vec<DMatrix<f64>> = training_clouds
        .iter()
        .zip(&hop1_rows)
        .map(|(cloud, rows)| {
            let (_, subcloud, spectral) = downsample_with_features(cloud, rows, &hop1, config)?;
            let lrfs = compute_lrf_field(&subcloud, config.k1)?;
            Ok(hop2_attributes(&subcloud, &lrfs, &spectral, config.k2))
        })
        .collect::<Result<_>>()?;
    let pooled2 = pool_rows(&hop2_rows, config.train_points_cap, &mut rng);
    let hop2 = fit_saab_full(&pooled2)?.truncated(TruncationRule::TargetDim(config.target_dim));
    if hop2.output_dim() < config.target_dim {
        tracing::warn!(
            target = config.target_dim,
            got = hop2.output_dim(),
            "hop-2 rank below target; features will be narrower than configured"
        );
    }

    Ok(FrPointHopModel { config: config.clone(), hop1, hop2 })
}

/// Runs a cloud through the fitted model: FPFH → hop-1 Saab → FPS half →
/// octant attributes in local frames → hop-2 Saab.
pub fn extract_features(model: &FrPointHopModel, cloud: &PointCloud) -> Result<PointFeatureSet> {
    let config = &model.config;
    check_cloud_size(cloud, config)?;

    let attrs1 = hop1_attributes(cloud, config.k1)?;
    let (retained, subcloud, spectral) = downsample_with_features(cloud, &attrs1, &model.hop1, config)?;
    let lrfs = compute_lrf_field(&subcloud, config.k1)?;
    let attrs2 = hop2_attributes(&subcloud, &lrfs, &spectral, config.k2);
    let features = model.hop2.apply_rows(&attrs2)?;
    debug_assert!(features.iter().all(|x| x.is_finite()));
    Ok(PointFeatureSet { features, retained })
}

fn check_cloud_size(cloud: &PointCloud, config: &HopConfig) -> Result<()> {
    if cloud.len() < 2 * config.k2 {
        return Err(Error::InvalidCloud(format!(
            "cloud has {} points; the two-hop pipeline needs at least 2·k2 = {}",
            cloud.len(),
            2 * config.k2
        )));
    }
    Ok(())
}

/// FPS-downsamples `cloud` and returns the retained indices, the subcloud,
/// and the hop-1 spectral responses of the retained points.
fn downsample_with_features(
    cloud: &PointCloud,
    attrs1: &DMatrix<f64>,
    hop1: &SaabKernel,
    config: &HopConfig,
) -> Result<(Vec<usize>, PointCloud, DMatrix<f64>)> {
    let retained = farthest_point_sample(cloud, config.retained_count(cloud.len()), 0)?;
    let subcloud = cloud.select(&retained);
    let mut sub_attrs = DMatrix::zeros(retained.len(), attrs1.ncols());
    for (row, &i) in retained.iter().enumerate() {
        sub_attrs.row_mut(row).copy_from(&attrs1.row(i));
    }
    let spectral = hop1.apply_rows(&sub_attrs)?;
    Ok((retained, subcloud, spectral))
}

/// Stacks per-cloud attribute matrices, sampling down to `cap` rows per
/// cloud (without replacement, order-preserving) when a cloud exceeds it.
fn pool_rows(per_cloud: &[DMatrix<f64>], cap: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let dim = per_cloud.first().map_or(0, |m| m.ncols());
    let mut kept: Vec<Vec<usize>> = Vec::with_capacity(per_cloud.len());
    for rows in per_cloud {
        if rows.nrows() <= cap {
            kept.push((0..rows.nrows()).collect());
        } else {
            let mut chosen = rand::seq::index::sample(rng, rows.nrows(), cap).into_vec();
            chosen.sort_unstable();
            kept.push(chosen);
        }
    }
    let total: usize = kept.iter().map(|k| k.len()).sum();
    let mut pooled = DMatrix::zeros(total, dim);
    let mut out_row = 0;
    for (rows, indices) in per_cloud.iter().zip(&kept) {
        for &i in indices {
            pooled.row_mut(out_row).copy_from(&rows.row(i));
            out_row += 1;
        }
    }
    pooled
}
