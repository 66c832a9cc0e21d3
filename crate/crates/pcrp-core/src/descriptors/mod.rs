//! Rotation-invariant local geometry: surface normals, local reference
//! frames, and the FPFH descriptor used as first-hop point attributes.

mod fpfh;
mod lrf;
mod normals;

pub use fpfh::{compute_fpfh, compute_spfh, FpfhDescriptor, FPFH_BINS, FPFH_DIM};
pub use lrf::{compute_lrf, compute_lrf_field, LocalReferenceFrame};
pub use normals::{estimate_normals, NormalField};
