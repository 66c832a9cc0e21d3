//! Point cloud types, rigid transforms, spatial search and sampling.

mod kdtree;
mod sampling;
mod transform;

pub use kdtree::SpatialIndex;
pub use sampling::farthest_point_sample;
pub use transform::{
    random_rigid_transform, rotation_about_axis, rotation_matrix_angle_deg, RigidTransform,
};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// An ordered set of 3D points. The universal input of the pipeline.
///
/// Clouds ingested from files are centered and scaled to the unit sphere so
/// that neighborhood sizes and distance thresholds are portable across
/// datasets; see [`PointCloud::normalize_to_unit_sphere`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("non-finite coordinate at point {i}")));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| Point3::new(r[0], r[1], r[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum: Vector3<f64> = self.points.iter().map(|p| p.coords).sum();
        Point3::from(sum / self.points.len() as f64)
    }

    /// Centers the cloud at the origin and scales the farthest point onto the
    /// unit sphere. Returns the normalized cloud together with the removed
    /// centroid and scale so callers can map results back to input
    /// coordinates.
    pub fn normalize_to_unit_sphere(&self) -> (PointCloud, Point3<f64>, f64) {
        let centroid = self.centroid();
        let max_norm = self
            .points
            .iter()
            .map(|p| (p - centroid).norm())
            .fold(0.0f64, f64::max);
        let scale = if max_norm > 0.0 { max_norm } else { 1.0 };
        let points = self.points.iter().map(|p| Point3::from((p - centroid) / scale)).collect();
        (PointCloud { points }, centroid, scale)
    }

    /// Maximum distance of any point from the origin.
    pub fn max_radius(&self) -> f64 {
        self.points.iter().map(|p| p.coords.norm()).fold(0.0, f64::max)
    }

    /// The sub-cloud formed by the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud { points: indices.iter().map(|&i| self.points[i]).collect() }
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        apply_transform(self, t)
    }
}

/// The k nearest neighbors of one point, distances non-decreasing.
#[derive(Debug, Clone)]
pub struct NeighborSet {
    pub center: usize,
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Applies `p ↦ R·p + t` to every point.
pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    PointCloud { points: cloud.points.iter().map(|p| t.apply(p)).collect() }
}

/// Symmetric chamfer distance: the mean nearest-neighbor distance from `a`
/// to `b` plus the mean from `b` to `a`. Zero iff the point sets coincide.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    directed_mean_nn(a, b) + directed_mean_nn(b, a)
}

fn directed_mean_nn(from: &PointCloud, to: &PointCloud) -> f64 {
    let index = SpatialIndex::build(to);
    let total: f64 = from
        .points
        .iter()
        .map(|p| index.nearest(p).1)
        .sum();
    total / from.len() as f64
}
