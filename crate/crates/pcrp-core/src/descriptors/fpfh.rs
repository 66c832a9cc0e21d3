//! Fast Point Feature Histograms over k-nearest neighborhoods.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};

use super::normals::NormalField;

/// Bins per Darboux angle feature.
pub const FPFH_BINS: usize = 11;
/// Total descriptor width: three concatenated 11-bin histograms (α, φ, θ).
pub const FPFH_DIM: usize = 3 * FPFH_BINS;

/// A 33-bin FPFH descriptor. Bins are non-negative and each 11-bin block
/// sums to 100 (percentage normalization), making the descriptor invariant
/// to rigid transforms of the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct FpfhDescriptor {
    bins: [f64; FPFH_DIM],
}

impl FpfhDescriptor {
    pub fn bins(&self) -> &[f64; FPFH_DIM] {
        &self.bins
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.bins
    }
}

/// Simplified Point Feature Histogram of one point over its `k` nearest
/// neighbors (self excluded).
///
/// For each neighbor `p_t` with normal `n_t`, the Darboux frame at the query
/// `p_s` is `u = n_s`, `v = d̂ × u`, `w = u × v` with `d̂ = (p_t − p_s)/‖·‖`,
/// and the angle features `α = v·n_t`, `φ = u·d̂`, `θ = atan2(w·n_t, u·n_t)`
/// are histogrammed into 11 bins over [−1, 1], [−1, 1], and [−π, π].
/// Zero-distance pairs and pairs where `d̂` is parallel to `n_s` contribute
/// nothing. Each block is normalized to sum 100; with no valid pairs the
/// histogram is all zeros.
pub fn compute_spfh(
    cloud: &PointCloud,
    normals: &NormalField,
    point: usize,
    k: usize,
) -> Result<[f64; FPFH_DIM]> {
    check_inputs(cloud, normals, k)?;
    let index = SpatialIndex::build(cloud);
    Ok(spfh_from_neighbors(cloud, normals, point, &index.knn_excluding(point, k)))
}

/// FPFH descriptors for every point:
/// `FPFH(p) = SPFH(p) + (1/k) Σ_i SPFH(p_i)/ω_i` with `ω_i = ‖p − p_i‖`,
/// renormalized per 11-bin block to sum 100. Zero-distance neighbors are
/// skipped in the weighted sum.
pub fn compute_fpfh(cloud: &PointCloud, normals: &NormalField, k: usize) -> Result<Vec<FpfhDescriptor>> {
    check_inputs(cloud, normals, k)?;
    let index = SpatialIndex::build(cloud);
    let neighbor_sets: Vec<Vec<(usize, f64)>> =
        (0..cloud.len()).into_par_iter().map(|i| index.knn_excluding(i, k)).collect();
    let spfhs: Vec<[f64; FPFH_DIM]> = (0..cloud.len())
        .into_par_iter()
        .map(|i| spfh_from_neighbors(cloud, normals, i, &neighbor_sets[i]))
        .collect();

    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut bins = spfhs[i];
            let k_eff = neighbor_sets[i].len() as f64;
            for &(j, dist) in &neighbor_sets[i] {
                if dist < 1e-12 {
                    continue;
                }
                let w = 1.0 / (k_eff * dist);
                for (b, s) in bins.iter_mut().zip(spfhs[j].iter()) {
                    *b += w * s;
                }
            }
            normalize_blocks(&mut bins);
            FpfhDescriptor { bins }
        })
        .collect())
}

fn check_inputs(cloud: &PointCloud, normals: &NormalField, k: usize) -> Result<()> {
    if normals.normals().len() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), got: normals.normals().len() });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("FPFH needs k >= 1".into()));
    }
    Ok(())
}

pub(crate) fn spfh_from_neighbors(
    cloud: &PointCloud,
    normals: &NormalField,
    point: usize,
    neighbors: &[(usize, f64)],
) -> [f64; FPFH_DIM] {
    let p_s = cloud.point(point);
    let n_s = normals.normal(point);
    let mut bins = [0.0; FPFH_DIM];
    for &(j, dist) in neighbors {
        if dist < 1e-12 {
            continue;
        }
        let d_hat = (cloud.point(j) - p_s) / dist;
        let v = d_hat.cross(&n_s);
        let v_norm = v.norm();
        if v_norm < 1e-12 {
            // Displacement parallel to the normal: Darboux frame undefined.
            continue;
        }
        let v = v / v_norm;
        let w = n_s.cross(&v);
        let n_t = normals.normal(j);

        let alpha = v.dot(&n_t);
        let phi = n_s.dot(&d_hat);
        let theta = w.dot(&n_t).atan2(n_s.dot(&n_t));

        bins[bin_index(alpha, -1.0, 1.0)] += 1.0;
        bins[FPFH_BINS + bin_index(phi, -1.0, 1.0)] += 1.0;
        bins[2 * FPFH_BINS + bin_index(theta, -std::f64::consts::PI, std::f64::consts::PI)] += 1.0;
    }
    normalize_blocks(&mut bins);
    bins
}

fn bin_index(x: f64, lo: f64, hi: f64) -> usize {
    let t = (x - lo) / (hi - lo) * FPFH_BINS as f64;
    (t as usize).min(FPFH_BINS - 1)
}

/// Scales each 11-bin block to sum 100; empty blocks stay zero.
fn normalize_blocks(bins: &mut [f64; FPFH_DIM]) {
    for block in bins.chunks_mut(FPFH_BINS) {
        let total: f64 = block.iter().sum();
        if total > 0.0 {
            for b in block {
                *b *= 100.0 / total;
            }
        }
    }
}
