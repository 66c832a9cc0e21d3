//! Principal-axis symmetry partitioning.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::PointCloud;
use crate::linalg::sorted_symmetric_eigen3;

/// A split of a centered cloud into two disjoint point sets across its most
/// symmetric principal axis.
///
/// For each principal direction the points are projected onto it and the
/// per-side first absolute moments are compared: `score = |Σ|p⁺| − Σ|p⁻||`.
/// The axis with the smallest score wins (ties → lowest axis index), and
/// points are labeled by projection sign, zeros counting as positive.
#[derive(Debug, Clone)]
pub struct SymmetryPartition {
    /// Index of the chosen axis among the principal components.
    pub axis: usize,
    /// Principal directions, eigenvalue-descending. Degenerate directions
    /// (zero variance) are still present but excluded from axis selection.
    pub axes: [Vector3<f64>; 3],
    /// Per-axis absolute moment differences.
    pub scores: [f64; 3],
    /// true = positive side of the chosen axis.
    pub sides: Vec<bool>,
    /// Number of principal directions with non-degenerate variance.
    pub rank: usize,
}

impl SymmetryPartition {
    /// Indices on the positive side.
    pub fn side_a(&self) -> Vec<usize> {
        (0..self.sides.len()).filter(|&i| self.sides[i]).collect()
    }

    /// Indices on the negative side.
    pub fn side_b(&self) -> Vec<usize> {
        (0..self.sides.len()).filter(|&i| !self.sides[i]).collect()
    }
}

/// Partitions `cloud` (expected centered: moments are taken about the
/// origin) along its most symmetric principal axis.
pub fn symmetry_partition(cloud: &PointCloud) -> SymmetryPartition {
    let mut covariance = Matrix3::zeros();
    let centroid = cloud.centroid();
    for p in cloud.points() {
        let d = p - centroid;
        covariance += d * d.transpose();
    }
    covariance /= cloud.len() as f64;
    let (values, axes) = sorted_symmetric_eigen3(&covariance);

    let rank = values.iter().take_while(|&&v| v > 1e-12).count();
    if rank < 3 {
        tracing::warn!(rank, "degenerate principal components; restricting axis choice");
    }

    let mut scores = [f64::INFINITY; 3];
    for (k, axis) in axes.iter().enumerate().take(rank.max(1)) {
        let mut positive = 0.0;
        let mut negative = 0.0;
        for p in cloud.points() {
            let proj = axis.dot(&p.coords);
            if proj >= 0.0 {
                positive += proj;
            } else {
                negative += -proj;
            }
        }
        scores[k] = (positive - negative).abs();
    }

    let mut axis = 0;
    for k in 1..3 {
        if scores[k] < scores[axis] {
            axis = k;
        }
    }
    let sides = cloud.points().iter().map(|p| axes[axis].dot(&p.coords) >= 0.0).collect();
    SymmetryPartition { axis, axes, scores, sides, rank }
}
