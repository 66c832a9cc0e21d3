//! End-to-end pose estimation: retrieval hand-off, symmetry-constrained
//! matching, RANSAC, and the final raw-coordinate refit.

use nalgebra::{Matrix3, Point3};

use crate::error::{Error, Result};
use crate::frpointhop::{extract_features, FrPointHopModel, PointFeatureSet};
use crate::geometry::{chamfer_distance, PointCloud, RigidTransform};
use crate::registration::correspondence::{
    match_correspondences, CorrespondenceSet, MatchOptions,
};
use crate::registration::procrustes::procrustes;
use crate::registration::ransac::{ransac_pose, RansacFit};
use crate::registration::symmetry::{symmetry_partition, SymmetryPartition};
use crate::retrieval::{compute_vlad, retrieve, GalleryIndex, GalleryRecord};

/// Knobs for the registration stage. Distances are in the normalized unit
/// sphere frame in which matching and RANSAC run.
#[derive(Debug, Clone)]
pub struct RegistrationOptions {
    pub ransac_iterations: usize,
    pub inlier_threshold: f64,
    pub mutual_filter: bool,
    /// Lowe ratio for pruning ambiguous feature matches; `<= 0` disables.
    pub ratio_test: f64,
    /// Alignments whose residual chamfer distance exceeds this are flagged
    /// unreliable.
    pub chamfer_reliability_threshold: f64,
    pub seed: u64,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self {
            ransac_iterations: 2000,
            inlier_threshold: 0.05,
            mutual_filter: true,
            ratio_test: 0.0,
            chamfer_reliability_threshold: 0.15,
            seed: 0,
        }
    }
}

/// The outcome of registering a query against a target object.
///
/// `transform` maps raw query coordinates onto the target's raw coordinate
/// frame. Residual statistics are reported in that frame; `chamfer` is the
/// residual chamfer distance in the normalized frame where thresholds are
/// scale-free.
#[derive(Debug, Clone)]
pub struct PoseEstimate {
    pub transform: RigidTransform,
    pub inlier_count: usize,
    pub rms_residual: f64,
    pub chamfer: f64,
    pub reliable: bool,
    /// Gallery id of the matched object when retrieval chose the target.
    pub retrieved_id: Option<String>,
    /// False when an empty symmetry side forced unconstrained matching.
    pub side_consistent: bool,
}

/// Geodesic angle between two rotations, in degrees.
pub fn rotation_error_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    crate::geometry::rotation_matrix_angle_deg(&(a * b.transpose()))
}

/// A cloud readied for registration: normalized copy, its features, and the
/// symmetry partition of the retained (downsampled) points.
struct Prepared {
    normalized: PointCloud,
    features: PointFeatureSet,
    partition: SymmetryPartition,
    /// Normalized coordinates of the retained points, aligned with feature rows.
    retained_points: Vec<Point3<f64>>,
}

fn prepare(model: &FrPointHopModel, cloud: &PointCloud) -> Result<Prepared> {
    let (normalized, _, _) = cloud.normalize_to_unit_sphere();
    let features = extract_features(model, &normalized)?;
    let subcloud = normalized.select(features.retained_indices());
    let partition = symmetry_partition(&subcloud);
    let retained_points = subcloud.points().to_vec();
    Ok(Prepared { normalized, features, partition, retained_points })
}

/// Registers `query` onto `target`: extracts features for both, partitions
/// each by its dominant symmetry plane, matches within sides under both side
/// associations, runs RANSAC on each, and keeps the stronger hypothesis. The
/// winning inlier correspondences are refit once in raw coordinates so the
/// returned transform maps the raw query directly onto the raw target.
pub fn register_pair(
    model: &FrPointHopModel,
    query: &PointCloud,
    target: &PointCloud,
    options: &RegistrationOptions,
) -> Result<PoseEstimate> {
    let query_prep = prepare(model, query)?;
    let target_prep = prepare(model, target)?;
    register_prepared(&query_prep, query, &target_prep, target, options)
}

/// Full pipeline for one query: extract features once, describe them with
/// the gallery codebook, retrieve the top match, load its cloud through
/// `load_target`, and register against it.
pub fn estimate_pose<F>(
    model: &FrPointHopModel,
    index: &GalleryIndex,
    query: &PointCloud,
    load_target: F,
    options: &RegistrationOptions,
) -> Result<PoseEstimate>
where
    F: FnOnce(&GalleryRecord) -> Result<PointCloud>,
{
    let query_prep = prepare(model, query)?;
    let vlad = compute_vlad(index.codebook(), query_prep.features.features())?;
    let hits = retrieve(index, &vlad, 1);
    let record =
        index.record(hits.first().ok_or(Error::EmptyGallery)?.record);
    let target = load_target(record)?;
    let target_prep = prepare(model, &target)?;
    let mut estimate =
        register_prepared(&query_prep, query, &target_prep, &target, options)?;
    estimate.retrieved_id = Some(record.id.clone());
    Ok(estimate)
}

fn register_prepared(
    query_prep: &Prepared,
    raw_query: &PointCloud,
    target_prep: &Prepared,
    raw_target: &PointCloud,
    options: &RegistrationOptions,
) -> Result<PoseEstimate> {
    let match_options =
        MatchOptions { mutual: options.mutual_filter, ratio: options.ratio_test };

    // Candidate side associations: A↔A/B↔B and A↔B/B↔A. When matching has
    // already fallen back to unconstrained, the flipped run would repeat it.
    let straight = candidate_fit(query_prep, target_prep, false, &match_options, options);
    let flipped = if matches!(&straight, Ok(c) if c.matches.side_consistent) {
        Some(candidate_fit(query_prep, target_prep, true, &match_options, options))
    } else {
        None
    };

    let mut best = straight;
    if let Some(other) = flipped {
        best = match (best, other) {
            (Ok(a), Ok(b)) => Ok(if prefer_second(&a, &b) { b } else { a }),
            (Err(_), Ok(b)) => Ok(b),
            (a, _) => a,
        };
    }
    let best = best?;

    // Refit on the final inliers in raw coordinates: the same correspondences,
    // but between the original (uncentered, unscaled) points, so the returned
    // transform needs no denormalization bookkeeping.
    let raw_q: Vec<Point3<f64>> = best
        .fit
        .inliers
        .iter()
        .map(|&i| raw_query.point(query_prep.features.retained_indices()[best.matches.pairs[i].query]))
        .collect();
    let raw_t: Vec<Point3<f64>> = best
        .fit
        .inliers
        .iter()
        .map(|&i| raw_target.point(target_prep.features.retained_indices()[best.matches.pairs[i].target]))
        .collect();
    let (transform, rms_residual) = if raw_q.len() >= 3 {
        let refit = procrustes(&raw_q, &raw_t)?;
        let sse: f64 =
            raw_q.iter().zip(&raw_t).map(|(q, t)| (refit.apply(q) - t).norm_squared()).sum();
        (refit, (sse / raw_q.len() as f64).sqrt())
    } else {
        // Best-effort path: RANSAC never converged; refit everything raw.
        let all_q: Vec<Point3<f64>> = best
            .matches
            .pairs
            .iter()
            .map(|p| raw_query.point(query_prep.features.retained_indices()[p.query]))
            .collect();
        let all_t: Vec<Point3<f64>> = best
            .matches
            .pairs
            .iter()
            .map(|p| raw_target.point(target_prep.features.retained_indices()[p.target]))
            .collect();
        let refit = procrustes(&all_q, &all_t)?;
        let sse: f64 =
            all_q.iter().zip(&all_t).map(|(q, t)| (refit.apply(q) - t).norm_squared()).sum();
        (refit, (sse / all_q.len() as f64).sqrt())
    };

    // Alignment quality in the normalized frame, under the normalized-frame
    // transform that selected the inliers.
    let aligned = query_prep.normalized.transformed(&best.fit.transform);
    let chamfer = chamfer_distance(&aligned, &target_prep.normalized);
    let reliable = best.fit.converged && chamfer <= options.chamfer_reliability_threshold;

    Ok(PoseEstimate {
        transform,
        inlier_count: best.fit.inliers.len(),
        rms_residual,
        chamfer,
        reliable,
        retrieved_id: None,
        side_consistent: best.matches.side_consistent,
    })
}

struct Candidate {
    matches: CorrespondenceSet,
    fit: RansacFit,
}

fn candidate_fit(
    query_prep: &Prepared,
    target_prep: &Prepared,
    flip: bool,
    match_options: &MatchOptions,
    options: &RegistrationOptions,
) -> Result<Candidate> {
    let matches = match_correspondences(
        query_prep.features.features(),
        target_prep.features.features(),
        &query_prep.partition.sides,
        &target_prep.partition.sides,
        flip,
        match_options,
    )?;
    let fit = ransac_pose(
        &query_prep.retained_points,
        &target_prep.retained_points,
        &matches.pairs,
        options.ransac_iterations,
        options.inlier_threshold,
        options.seed,
    )?;
    Ok(Candidate { matches, fit })
}

/// True when `b` should replace `a`: convergence first, then strictly more
/// inliers (ties keep the straight association in `a`).
fn prefer_second(a: &Candidate, b: &Candidate) -> bool {
    match (a.fit.converged, b.fit.converged) {
        (true, false) => false,
        (false, true) => true,
        _ => b.fit.inliers.len() > a.fit.inliers.len(),
    }
}
