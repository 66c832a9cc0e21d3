//! Closed-form rigid alignment of paired points (orthogonal Procrustes /
//! Kabsch).

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// The rigid transform minimizing `Σ ‖R·q_i + t − p_i‖²` over the pairs
/// `(q_i, p_i)`.
///
/// `R = V·diag(1, 1, det(V·Uᵀ))·Uᵀ` from the SVD `U·Σ·Vᵀ` of the centered
/// cross-covariance `Σ (q_i − q̄)(p_i − p̄)ᵀ`, with the determinant correction
/// preventing reflections; `t = p̄ − R·q̄`.
pub fn procrustes(query: &[Point3<f64>], target: &[Point3<f64>]) -> Result<RigidTransform> {
    if query.len() != target.len() {
        return Err(Error::DimensionMismatch { expected: query.len(), got: target.len() });
    }
    if query.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: query.len() });
    }

    let n = query.len() as f64;
    let mut q_bar = Vector3::zeros();
    let mut p_bar = Vector3::zeros();
    for (q, p) in query.iter().zip(target) {
        q_bar += q.coords;
        p_bar += p.coords;
    }
    q_bar /= n;
    p_bar /= n;

    let mut cross = Matrix3::zeros();
    for (q, p) in query.iter().zip(target) {
        cross += (q.coords - q_bar) * (p.coords - p_bar).transpose();
    }

    let svd = cross.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Degenerate("SVD failed on cross-covariance".into()))?;
    let v = svd.v_t.ok_or_else(|| Error::Degenerate("SVD failed on cross-covariance".into()))?.transpose();
    // A collinear pair configuration leaves the rotation about the common
    // axis undetermined: the second singular value vanishes.
    if svd.singular_values[1] <= 1e-12 * svd.singular_values[0].max(1e-300) {
        return Err(Error::Degenerate("collinear correspondences; rotation underdetermined".into()));
    }

    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let translation = p_bar - rotation * q_bar;
    RigidTransform::new(rotation, translation)
}

/// `Σ ‖T(q_i) − p_i‖²` for diagnostics and tests.
pub fn pair_sse(transform: &RigidTransform, query: &[Point3<f64>], target: &[Point3<f64>]) -> f64 {
    query.iter().zip(target).map(|(q, p)| (transform.apply(q) - p).norm_squared()).sum()
}
