//! Point-to-point ICP, kept as a deliberately plain baseline.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform, SpatialIndex};
use crate::registration::procrustes::procrustes;

/// An ICP run: the final transform, iterations spent, and the mean
/// closest-point residual at the last iteration.
#[derive(Debug, Clone)]
pub struct IcpResult {
    pub transform: RigidTransform,
    pub iterations: usize,
    pub mean_residual: f64,
}

/// Classic point-to-point ICP from the identity initialization: alternate
/// closest-point association against `target` with a Procrustes refit, until
/// the mean residual changes by less than `tolerance` between iterations or
/// `max_iterations` is reached. No trimming, no symmetry handling — this is
/// the baseline the constrained pipeline is measured against, and from a bad
/// start it converges to whatever local minimum is nearest.
pub fn icp_baseline(
    query: &PointCloud,
    target: &PointCloud,
    max_iterations: usize,
    tolerance: f64,
) -> Result<IcpResult> {
    if query.len() < 3 || target.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: query.len().min(target.len()) });
    }
    if max_iterations == 0 || tolerance < 0.0 {
        return Err(Error::InvalidConfig(
            "icp needs at least one iteration and a nonnegative tolerance".into(),
        ));
    }

    let index = SpatialIndex::build(target);
    let mut transform = RigidTransform::identity();
    let mut previous_residual = f64::INFINITY;
    let mut iterations = 0;

    for iter in 1..=max_iterations {
        iterations = iter;
        let moved: Vec<Point3<f64>> =
            query.points().iter().map(|p| transform.apply(p)).collect();

        let mut matched: Vec<Point3<f64>> = Vec::with_capacity(moved.len());
        let mut residual_sum = 0.0;
        for p in &moved {
            let (idx, dist) = index.nearest(p);
            residual_sum += dist;
            matched.push(target.points()[idx]);
        }
        let mean_residual = residual_sum / moved.len() as f64;

        // Absolute refit: original query against current associations, so
        // numerical error does not accumulate across iterations.
        transform = procrustes(query.points(), &matched)?;

        if (previous_residual - mean_residual).abs() < tolerance {
            previous_residual = mean_residual;
            break;
        }
        previous_residual = mean_residual;
    }

    Ok(IcpResult { transform, iterations, mean_residual: previous_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit, Vector3};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn blobby_cloud(seed: u64, n: usize) -> PointCloud {
        let mut rng = StdRng::seed_from_u64(seed);
        let centers =
            [Vector3::new(0.8, 0.0, 0.1), Vector3::new(-0.5, 0.6, -0.4), Vector3::new(0.0, -0.9, 0.5)];
        let points = (0..n)
            .map(|i| {
                let c = centers[i % 3];
                Point3::new(
                    c.x + rng.random_range(-0.3..0.3),
                    c.y + rng.random_range(-0.3..0.3),
                    c.z + rng.random_range(-0.3..0.3),
                )
            })
            .collect();
        PointCloud::new(points).unwrap()
    }

    fn rotated(cloud: &PointCloud, degrees: f64, axis: Vector3<f64>) -> (PointCloud, RigidTransform) {
        let rotation =
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), degrees.to_radians());
        let transform =
            RigidTransform::new(*rotation.matrix(), Vector3::new(0.05, -0.02, 0.03)).unwrap();
        (cloud.transformed(&transform), transform)
    }

    fn rotation_gap_deg(a: &RigidTransform, b: &RigidTransform) -> f64 {
        let relative = a.rotation().transpose() * b.rotation();
        ((relative.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn identity_alignment_converges_immediately() {
        let cloud = blobby_cloud(1, 300);
        let result = icp_baseline(&cloud, &cloud, 50, 1e-9).unwrap();
        assert!(result.mean_residual < 1e-12);
        assert!(rotation_gap_deg(&result.transform, &RigidTransform::identity()) < 1e-6);
        assert!(result.iterations <= 3);
    }

    #[test]
    fn recovers_small_rotations() {
        let cloud = blobby_cloud(2, 400);
        let (moved, truth) = rotated(&cloud, 5.0, Vector3::new(0.2, 1.0, -0.3));
        // Align the rotated copy back onto the original: truth⁻¹.
        let result = icp_baseline(&moved, &cloud, 100, 1e-10).unwrap();
        let expected = truth.inverse();
        assert!(
            rotation_gap_deg(&result.transform, &expected) < 0.5,
            "gap {} deg",
            rotation_gap_deg(&result.transform, &expected)
        );
        assert!(result.mean_residual < 1e-6);
    }

    #[test]
    fn large_rotations_strand_it_in_a_local_minimum() {
        let cloud = blobby_cloud(3, 400);
        let (moved, truth) = rotated(&cloud, 120.0, Vector3::new(0.0, 1.0, 0.1));
        let result = icp_baseline(&moved, &cloud, 200, 1e-10).unwrap();
        let expected = truth.inverse();
        // The point of the baseline: from identity it cannot cross a 120°
        // basin on an asymmetric shape.
        assert!(
            rotation_gap_deg(&result.transform, &expected) > 5.0,
            "unexpectedly recovered: gap {} deg",
            rotation_gap_deg(&result.transform, &expected)
        );
    }

    #[test]
    fn iteration_budget_is_respected() {
        let cloud = blobby_cloud(4, 200);
        let (moved, _) = rotated(&cloud, 40.0, Vector3::new(1.0, 0.3, 0.0));
        let result = icp_baseline(&moved, &cloud, 5, 0.0).unwrap();
        assert!(result.iterations <= 5);
    }

    #[test]
    fn rejects_tiny_inputs() {
        let two = PointCloud::new(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let big = blobby_cloud(5, 50);
        assert!(icp_baseline(&two, &big, 10, 1e-6).is_err());
        assert!(icp_baseline(&big, &two, 10, 1e-6).is_err());
        assert!(icp_baseline(&big, &big, 0, 1e-6).is_err());
    }
}
