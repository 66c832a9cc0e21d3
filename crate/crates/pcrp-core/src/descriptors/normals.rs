//! Surface normal estimation from neighborhood covariance.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};
use crate::linalg::sorted_symmetric_eigen3;

/// Per-point unit normals.
///
/// Signs follow an outward-from-centroid convention: each normal has a
/// non-negative dot product with the vector from the cloud centroid to its
/// point; exact ties are resolved toward +z. This keeps Darboux-frame angles
/// deterministic on closed shapes.
#[derive(Debug, Clone)]
pub struct NormalField {
    normals: Vec<Vector3<f64>>,
    degenerate: Vec<bool>,
}

impl NormalField {
    pub fn normal(&self, i: usize) -> Vector3<f64> {
        self.normals[i]
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    /// True where the neighborhood covariance was too degenerate to define a
    /// normal (the +z fallback was used).
    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

/// Estimates a normal per point as the smallest-eigenvalue eigenvector of its
/// k-nearest-neighbor covariance (neighborhood includes the point itself).
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalField> {
    if k < 3 {
        return Err(Error::InvalidConfig(format!("normal estimation needs k >= 3, got {k}")));
    }
    let index = SpatialIndex::build(cloud);
    let centroid = cloud.centroid();

    let per_point: Vec<(Vector3<f64>, bool)> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let neighbors = index.knn(&cloud.point(i), k);
            let covariance = neighborhood_covariance(cloud, &neighbors);
            let (values, vectors) = sorted_symmetric_eigen3(&covariance);
            if values[0] < 1e-12 {
                return (Vector3::z(), true);
            }
            let mut normal = vectors[2];
            orient(&mut normal, &(cloud.point(i) - centroid));
            (normal, false)
        })
        .collect();

    let (normals, degenerate) = per_point.into_iter().unzip();
    Ok(NormalField { normals, degenerate })
}

fn neighborhood_covariance(cloud: &PointCloud, neighbors: &[(usize, f64)]) -> Matrix3<f64> {
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
    cov / neighbors.len() as f64
}

fn orient(normal: &mut Vector3<f64>, outward: &Vector3<f64>) {
    let dot = normal.dot(outward);
    if dot < -1e-12 {
        *normal = -*normal;
    } else if dot.abs() <= 1e-12 && normal.z < 0.0 {
        *normal = -*normal;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_transform, random_rigid_transform};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn plane_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = StdRng::seed_from_u64(seed);
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    fn fibonacci_sphere(n: usize) -> PointCloud {
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let theta = golden * i as f64;
                [r * theta.cos(), y, r * theta.sin()]
            })
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn plane_normals_are_z_and_consistent() {
        let cloud = plane_cloud(200, 1);
        let field = estimate_normals(&cloud, 8).unwrap();
        for i in 0..cloud.len() {
            let n = field.normal(i);
            assert!((n - Vector3::z()).norm() < 1e-9, "point {i}: {n:?}");
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let cloud = fibonacci_sphere(2000);
        let field = estimate_normals(&cloud, 12).unwrap();
        for i in 0..cloud.len() {
            let radial = cloud.point(i).coords.normalize();
            let angle = field.normal(i).dot(&radial).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 2.0, "point {i}: {angle} deg off radial");
        }
    }

    #[test]
    fn rotated_cloud_normals_match_rotated_field() {
        let cloud = fibonacci_sphere(400);
        let field = estimate_normals(&cloud, 10).unwrap();
        let t = random_rigid_transform(5, 180.0, 0.3);
        let rotated_field = estimate_normals(&apply_transform(&cloud, &t), 10).unwrap();
        for i in 0..cloud.len() {
            let expected = t.rotation() * field.normal(i);
            let got = rotated_field.normal(i);
            let diff = (got - expected).norm().min((got + expected).norm());
            assert!(diff < 1e-6, "point {i}: {diff}");
        }
    }

    #[test]
    fn degenerate_neighborhood_falls_back_to_z() {
        let cloud = PointCloud::from_rows(&[[0.5, 0.5, 0.5]; 10]).unwrap();
        let field = estimate_normals(&cloud, 4).unwrap();
        assert!(field.is_degenerate(0));
        assert_eq!(field.normal(0), Vector3::z());
        assert_eq!(field.degenerate_count(), 10);
    }

    #[test]
    fn tiny_k_is_rejected() {
        let cloud = plane_cloud(10, 2);
        assert!(estimate_normals(&cloud, 2).is_err());
    }
}
