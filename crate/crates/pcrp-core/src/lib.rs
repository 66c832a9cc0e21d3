//! Unsupervised point cloud object retrieval and 6-DOF pose estimation.
//!
//! The pipeline has three stages:
//!
//! 1. **Feature extraction** ([`frpointhop`]): a two-hop subspace feature
//!    learner. The first hop uses FPFH descriptors ([`descriptors`]) as point
//!    attributes, the second hop pools first-hop spectral responses over local
//!    reference frame octants. Each hop applies a Saab (PCA with a mean/DC
//!    split) transform fitted on unlabeled training clouds.
//! 2. **Retrieval** ([`retrieval`]): per-point features are aggregated into a
//!    global VLAD vector, matched against a precomputed gallery of pre-aligned
//!    objects by nearest-neighbor search.
//! 3. **Registration** ([`registration`]): feature-space correspondences
//!    between the query and the retrieved object, constrained by a
//!    principal-axis symmetry partition, feed an orthogonal Procrustes solve
//!    inside RANSAC. Because gallery objects are in canonical pose, the
//!    aligning transform is the query's 6-DOF pose.
//!
//! [`ops`] wires the stages into the operations exposed by the HTTP service
//! and the CLI: train, index, query, register, eval, sample.

pub mod config;
pub mod descriptors;
pub mod error;
pub mod frpointhop;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod ops;
pub mod registration;
pub mod retrieval;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use geometry::{PointCloud, RigidTransform};
