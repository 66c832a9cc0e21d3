//! Local reference frames from neighborhood covariance.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};
use crate::linalg::sorted_symmetric_eigen3;

/// A right-handed orthonormal basis attached to one point, ordered by
/// descending neighborhood variance.
///
/// Signs are disambiguated the SHOT way: `e1` and `e3` each point toward the
/// majority of neighbor displacements, and `e2 = e3 × e1`. `ambiguous` is set
/// when eigenvalues repeat, in which case the axes are arbitrary within the
/// repeated eigenspace and downstream rotation equivariance is not
/// guaranteed.
#[derive(Debug, Clone)]
pub struct LocalReferenceFrame {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub e3: Vector3<f64>,
    pub eigenvalues: [f64; 3],
    pub ambiguous: bool,
}

impl LocalReferenceFrame {
    /// Rotation whose rows are `(e1, e2, e3)`: maps world coordinates into
    /// the local frame.
    pub fn to_local(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[self.e1.transpose(), self.e2.transpose(), self.e3.transpose()])
    }

    /// Coordinates of `v` expressed in this frame.
    pub fn project(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.e1.dot(v), self.e2.dot(v), self.e3.dot(v))
    }
}

/// The frame of one point from its `k` nearest neighbors (self included).
pub fn compute_lrf(cloud: &PointCloud, point: usize, k: usize) -> Result<LocalReferenceFrame> {
    if k < 4 {
        return Err(Error::InvalidConfig(format!("LRF estimation needs k >= 4, got {k}")));
    }
    let index = SpatialIndex::build(cloud);
    Ok(lrf_from_neighbors(cloud, point, &index.knn(&cloud.point(point), k)))
}

/// Frames for every point of the cloud, sharing one spatial index.
pub fn compute_lrf_field(cloud: &PointCloud, k: usize) -> Result<Vec<LocalReferenceFrame>> {
    if k < 4 {
        return Err(Error::InvalidConfig(format!("LRF estimation needs k >= 4, got {k}")));
    }
    let index = SpatialIndex::build(cloud);
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| lrf_from_neighbors(cloud, i, &index.knn(&cloud.point(i), k)))
        .collect())
}

fn lrf_from_neighbors(
    cloud: &PointCloud,
    center: usize,
    neighbors: &[(usize, f64)],
) -> LocalReferenceFrame {
    let mut mean = Vector3::zeros();
    for &(j, _) in neighbors {
        mean += cloud.point(j).coords;
    }
    mean /= neighbors.len() as f64;

    let mut cov = Matrix3::zeros();
    for &(j, _) in neighbors {
        let d = cloud.point(j).coords - mean;
        cov += d * d.transpose();
    }
    cov /= neighbors.len() as f64;

    let (values, vectors) = sorted_symmetric_eigen3(&cov);
    let ambiguous = values[0] - values[1] < 1e-10 || values[1] - values[2] < 1e-10;

    let displacements: Vec<Vector3<f64>> = neighbors
        .iter()
        .map(|&(j, _)| cloud.point(j) - cloud.point(center))
        .collect();
    let mut e1 = vectors[0];
    let mut e3 = vectors[2];
    orient_to_majority(&mut e1, &displacements);
    orient_to_majority(&mut e3, &displacements);
    let e2 = e3.cross(&e1);

    LocalReferenceFrame { e1, e2, e3, eigenvalues: values, ambiguous }
}

/// Flips `axis` so that most displacement projections are non-negative;
/// count ties fall back to the projection sum.
fn orient_to_majority(axis: &mut Vector3<f64>, displacements: &[Vector3<f64>]) {
    let mut positive = 0usize;
    let mut negative = 0usize;
    let mut sum = 0.0;
    for d in displacements {
        let proj = axis.dot(d);
        sum += proj;
        if proj > 0.0 {
            positive += 1;
        } else if proj < 0.0 {
            negative += 1;
        }
    }
    let flip = match positive.cmp(&negative) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => sum < 0.0,
    };
    if flip {
        *axis = -*axis;
    }
}
