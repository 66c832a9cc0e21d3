//! File ingestion: XYZ point lists, OFF meshes, dataset layout.

mod dataset;
mod off;
mod xyz;

pub use dataset::{list_cloud_files, list_split, object_id_from_path, DatasetEntry};
pub use off::{read_off, sample_mesh_surface, TriMesh};
pub use xyz::{read_xyz, write_xyz};

use std::path::Path;

use crate::error::Result;
use crate::geometry::PointCloud;

/// Loads a point cloud file by extension (`.xyz` only; meshes go through
/// [`sample_mesh_surface`] first). The cloud is returned as stored, without
/// normalization.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    read_xyz(path)
}
