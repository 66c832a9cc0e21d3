//! Per-hop attribute construction: FPFH rows for hop 1, LRF-octant pooled
//! spectral responses for hop 2.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::descriptors::{compute_fpfh, estimate_normals, LocalReferenceFrame};
use crate::descriptors::FPFH_DIM;
use crate::error::Result;
use crate::geometry::{PointCloud, SpatialIndex};

/// Hop-1 attributes: the 33-D FPFH of every point over its `k1` nearest
/// neighbors, as rows of an `N × 33` matrix. Normals use the same
/// neighborhood size.
pub fn hop1_attributes(cloud: &PointCloud, k1: usize) -> Result<DMatrix<f64>> {
    let normals = estimate_normals(cloud, k1)?;
    let descriptors = compute_fpfh(cloud, &normals, k1)?;
    let mut rows = DMatrix::zeros(cloud.len(), FPFH_DIM);
    for (i, descriptor) in descriptors.iter().enumerate() {
        for (j, &b) in descriptor.bins().iter().enumerate() {
            rows[(i, j)] = b;
        }
    }
    Ok(rows)
}

/// Hop-2 attribute of one point: its `k2` nearest neighbors (self excluded)
/// are expressed in the point's local reference frame and assigned to the
/// eight octants; for each hop-1 spectral channel the mean channel response
/// per octant (0 where empty) forms an 8-vector, and the per-channel
/// 8-vectors are concatenated into `8·d₁` values, channel-major.
pub fn hop2_attribute(
    cloud: &PointCloud,
    index: &SpatialIndex,
    lrf: &LocalReferenceFrame,
    hop1_spectral: &DMatrix<f64>,
    point: usize,
    k2: usize,
) -> Vec<f64> {
    let d1 = hop1_spectral.ncols();
    let mut sums = vec![0.0; 8 * d1];
    let mut counts = [0usize; 8];
    let center = cloud.point(point);
    for (j, _) in index.knn_excluding(point, k2) {
        let local = lrf.project(&(cloud.point(j) - center));
        let octant = ((local.x >= 0.0) as usize) << 2
            | ((local.y >= 0.0) as usize) << 1
            | (local.z >= 0.0) as usize;
        counts[octant] += 1;
        for channel in 0..d1 {
            sums[channel * 8 + octant] += hop1_spectral[(j, channel)];
        }
    }
    for octant in 0..8 {
        if counts[octant] > 1 {
            let inv = 1.0 / counts[octant] as f64;
            for channel in 0..d1 {
                sums[channel * 8 + octant] *= inv;
            }
        }
    }
    sums
}

/// Hop-2 attributes for every point of `cloud` (the FPS-retained subcloud),
/// as rows of an `N × 8·d₁` matrix.
pub fn hop2_attributes(
    cloud: &PointCloud,
    lrfs: &[LocalReferenceFrame],
    hop1_spectral: &DMatrix<f64>,
    k2: usize,
) -> DMatrix<f64> {
    let index = SpatialIndex::build(cloud);
    let d1 = hop1_spectral.ncols();
    let rows: Vec<Vec<f64>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| hop2_attribute(cloud, &index, &lrfs[i], hop1_spectral, i, k2))
        .collect();
    let mut out = DMatrix::zeros(cloud.len(), 8 * d1);
    for (i, row) in rows.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            out[(i, j)] = x;
        }
    }
    out
}
