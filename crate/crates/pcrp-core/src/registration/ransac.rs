//! RANSAC over candidate correspondences with a rigid-motion model.

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;
use crate::registration::correspondence::Correspondence;
use crate::registration::procrustes::procrustes;

/// Result of a RANSAC fit: the transform, which correspondences it accepted,
/// and their RMS residual under the final transform.
#[derive(Debug, Clone)]
pub struct RansacFit {
    pub transform: RigidTransform,
    /// Indices into the input correspondence list.
    pub inliers: Vec<usize>,
    pub rms_residual: f64,
    /// False when fewer than three inliers survived and the transform fell
    /// back to a best-effort fit over all pairs.
    pub converged: bool,
}

/// Estimates a rigid transform mapping `query` points onto `target` points
/// through the given correspondences. Draws minimal 3-pair samples, keeps
/// the hypothesis with the most inliers within `inlier_threshold`, then
/// refits on the inlier set and re-selects inliers once against the refit.
/// With fewer than three final inliers the fit degrades to a single
/// Procrustes solve over every correspondence and reports `converged: false`.
pub fn ransac_pose(
    query: &[Point3<f64>],
    target: &[Point3<f64>],
    correspondences: &[Correspondence],
    iterations: usize,
    inlier_threshold: f64,
    seed: u64,
) -> Result<RansacFit> {
    if correspondences.is_empty() {
        return Err(Error::InsufficientSamples { needed: 3, got: 0 });
    }
    if iterations == 0 || inlier_threshold <= 0.0 {
        return Err(Error::InvalidConfig(
            "ransac needs a positive iteration count and inlier threshold".into(),
        ));
    }
    for c in correspondences {
        if c.query >= query.len() || c.target >= target.len() {
            return Err(Error::InvalidCloud("correspondence index out of range".into()));
        }
    }

    let n = correspondences.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_count = 0usize;
    let mut best_transform: Option<RigidTransform> = None;

    if n >= 3 {
        let mut sample_q = [Point3::origin(); 3];
        let mut sample_t = [Point3::origin(); 3];
        for _ in 0..iterations {
            let picks = rand::seq::index::sample(&mut rng, n, 3);
            for (slot, pick) in picks.iter().enumerate() {
                let c = &correspondences[pick];
                sample_q[slot] = query[c.query];
                sample_t[slot] = target[c.target];
            }
            let Ok(candidate) = procrustes(&sample_q, &sample_t) else {
                continue; // degenerate minimal sample (collinear / coincident)
            };
            let count = count_inliers(&candidate, query, target, correspondences, inlier_threshold);
            if count > best_count {
                best_count = count;
                best_transform = Some(candidate);
            }
        }
    }

    if let Some(hypothesis) = best_transform {
        let inliers =
            select_inliers(&hypothesis, query, target, correspondences, inlier_threshold);
        if inliers.len() >= 3 {
            if let Ok(refit) = refit_on(&inliers, query, target, correspondences) {
                // Re-select against the refit so every reported inlier truly
                // sits within the threshold of the final transform.
                let final_inliers =
                    select_inliers(&refit, query, target, correspondences, inlier_threshold);
                if final_inliers.len() >= 3 {
                    let rms = rms_over(&refit, &final_inliers, query, target, correspondences);
                    return Ok(RansacFit {
                        transform: refit,
                        inliers: final_inliers,
                        rms_residual: rms,
                        converged: true,
                    });
                }
            }
        }
    }

    // Best-effort fallback: fit once over everything.
    let all: Vec<usize> = (0..n).collect();
    let transform = refit_on(&all, query, target, correspondences)?;
    let inliers = select_inliers(&transform, query, target, correspondences, inlier_threshold);
    let rms = if inliers.is_empty() {
        rms_over(&transform, &all, query, target, correspondences)
    } else {
        rms_over(&transform, &inliers, query, target, correspondences)
    };
    Ok(RansacFit { transform, inliers, rms_residual: rms, converged: false })
}

fn residual(t: &RigidTransform, q: &Point3<f64>, p: &Point3<f64>) -> f64 {
    (t.apply(q) - p).norm()
}

fn count_inliers(
    t: &RigidTransform,
    query: &[Point3<f64>],
    target: &[Point3<f64>],
    correspondences: &[Correspondence],
    threshold: f64,
) -> usize {
    correspondences
        .iter()
        .filter(|c| residual(t, &query[c.query], &target[c.target]) < threshold)
        .count()
}

fn select_inliers(
    t: &RigidTransform,
    query: &[Point3<f64>],
    target: &[Point3<f64>],
    correspondences: &[Correspondence],
    threshold: f64,
) -> Vec<usize> {
    correspondences
        .iter()
        .enumerate()
        .filter(|(_, c)| residual(t, &query[c.query], &target[c.target]) < threshold)
        .map(|(i, _)| i)
        .collect()
}

fn refit_on(
    subset: &[usize],
    query: &[Point3<f64>],
    target: &[Point3<f64>],
    correspondences: &[Correspondence],
) -> Result<RigidTransform> {
    let q: Vec<Point3<f64>> = subset.iter().map(|&i| query[correspondences[i].query]).collect();
    let t: Vec<Point3<f64>> = subset.iter().map(|&i| target[correspondences[i].target]).collect();
    procrustes(&q, &t)
}

fn rms_over(
    t: &RigidTransform,
    subset: &[usize],
    query: &[Point3<f64>],
    target: &[Point3<f64>],
    correspondences: &[Correspondence],
) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    let sum: f64 = subset
        .iter()
        .map(|&i| {
            let c = &correspondences[i];
            let r = residual(t, &query[c.query], &target[c.target]);
            r * r
        })
        .sum();
    (sum / subset.len() as f64).sqrt()
}
