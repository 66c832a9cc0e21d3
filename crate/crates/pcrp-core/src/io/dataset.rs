//! ModelNet-style dataset layout: `<root>/<category>/<split>/<object>.xyz`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One object in a dataset listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub category: String,
    pub path: PathBuf,
}

/// Object id from a file path: the file stem.
pub fn object_id_from_path(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Lists `.xyz` files directly inside `dir`, sorted by id. The category label
/// for all entries is `category`.
pub fn list_cloud_files(dir: &Path, category: &str) -> Result<Vec<DatasetEntry>> {
    let mut entries = Vec::new();
    let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for item in read {
        let item = item.map_err(|e| Error::io(dir, e))?;
        let path = item.path();
        if path.extension().is_some_and(|e| e == "xyz") {
            entries.push(DatasetEntry {
                id: object_id_from_path(&path),
                category: category.to_string(),
                path,
            });
        }
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(entries)
}

/// Lists one split (`train`/`test`) of the requested categories, sorted by
/// `(category, id)`. Categories are directory names under `root`.
pub fn list_split(root: &Path, categories: &[String], split: &str) -> Result<Vec<DatasetEntry>> {
    let mut all = Vec::new();
    for category in categories {
        let dir = root.join(category).join(split);
        if !dir.is_dir() {
            return Err(Error::InvalidConfig(format!("dataset split directory missing: {}", dir.display())));
        }
        all.extend(list_cloud_files(&dir, category)?);
    }
    all.sort_by(|a, b| a.category.cmp(&b.category).then(a.id.cmp(&b.id)));
    Ok(all)
}
