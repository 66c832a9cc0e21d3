//! Symmetry-aware rigid registration.
//!
//! The stage runs in a normalized unit-sphere frame: both clouds are
//! partitioned by their dominant reflective-symmetry plane, features are
//! matched within corresponding sides (both side associations are tried),
//! RANSAC prunes the matches to a rigid-consistent inlier set, and a final
//! Procrustes refit in raw coordinates produces the reported transform.
//! [`icp_baseline`] is the unconstrained classic the pipeline is compared
//! against.

mod correspondence;
mod icp;
mod pose;
mod procrustes;
mod ransac;
mod symmetry;

pub use correspondence::{match_correspondences, Correspondence, CorrespondenceSet, MatchOptions};
pub use icp::{icp_baseline, IcpResult};
pub use pose::{
    estimate_pose, register_pair, rotation_error_deg, PoseEstimate, RegistrationOptions,
};
pub use procrustes::{pair_sse, procrustes};
pub use ransac::{ransac_pose, RansacFit};
pub use symmetry::{symmetry_partition, SymmetryPartition};
