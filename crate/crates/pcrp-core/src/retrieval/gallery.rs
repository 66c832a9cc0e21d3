//! Gallery construction, persistence ("PCRG" files), and retrieval.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frpointhop::{extract_features, FrPointHopModel, Reader};
use crate::geometry::{chamfer_distance, PointCloud};

use super::kmeans::VladCodebook;
use super::vlad::{compute_vlad, VladVector};

const MAGIC: &[u8; 4] = b"PCRG";
const VERSION: u32 = 1;

/// One object to be indexed.
#[derive(Debug, Clone)]
pub struct GalleryObject {
    pub id: String,
    pub category: String,
    pub cloud: PointCloud,
    /// Where the canonical-pose cloud lives on disk, kept so registration
    /// can reload it later.
    pub cloud_path: String,
}

/// One indexed record: the global descriptor plus enough metadata to find
/// the canonical-pose cloud again.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryRecord {
    pub id: String,
    pub category: String,
    pub vlad: VladVector,
    pub cloud_path: String,
}

/// An immutable gallery: records sorted by id, plus the codebook that
/// produced their VLAD vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryIndex {
    codebook: VladCodebook,
    records: Vec<GalleryRecord>,
}

/// One retrieval result: a record position in the gallery and its Euclidean
/// distance in VLAD space.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub record: usize,
    pub distance: f64,
}

impl GalleryIndex {
    pub fn codebook(&self) -> &VladCodebook {
        &self.codebook
    }

    pub fn records(&self) -> &[GalleryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, i: usize) -> &GalleryRecord {
        &self.records[i]
    }

    fn validate(codebook: &VladCodebook, records: &[GalleryRecord]) -> Result<()> {
        if records.is_empty() {
            return Err(Error::EmptyGallery);
        }
        let expected = codebook.k() * codebook.dim();
        let mut ids = HashSet::new();
        for r in records {
            if r.vlad.len() != expected {
                return Err(Error::DimensionMismatch { expected, got: r.vlad.len() });
            }
            if !ids.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(())
    }
}

/// Extracts features and VLAD descriptors for every object and assembles the
/// index, records sorted by id. Objects are processed in parallel; ids must
/// be unique.
pub fn build_gallery(
    model: &FrPointHopModel,
    codebook: &VladCodebook,
    objects: &[GalleryObject],
) -> Result<GalleryIndex> {
    if objects.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let mut records: Vec<GalleryRecord> = objects
        .par_iter()
        .map(|object| {
            let features = extract_features(model, &object.cloud)?;
            let vlad = compute_vlad(codebook, features.features())?;
            if vlad.is_degenerate() {
                tracing::warn!(id = %object.id, "degenerate (all-zero) VLAD descriptor");
            }
            Ok(GalleryRecord {
                id: object.id.clone(),
                category: object.category.clone(),
                vlad,
                cloud_path: object.cloud_path.clone(),
            })
        })
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    GalleryIndex::validate(codebook, &records)?;
    Ok(GalleryIndex { codebook: codebook.clone(), records })
}

/// The `m` nearest gallery records to `query` by Euclidean VLAD distance,
/// ties broken by id order. `m` larger than the gallery is clamped.
pub fn retrieve(index: &GalleryIndex, query: &VladVector, m: usize) -> Vec<RetrievalHit> {
    let mut hits: Vec<RetrievalHit> = index
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| RetrievalHit { record: i, distance: query.distance(&r.vlad) })
        .collect();
    hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.record.cmp(&b.record)));
    hits.truncate(m);
    hits
}

/// Fraction of the top-`m` retrieved ids present among the top-`m`
/// ground-truth ids.
pub fn precision_at_m(retrieved: &[String], ground_truth: &[String], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let truth: HashSet<&str> = ground_truth.iter().take(m).map(String::as_str).collect();
    let hits = retrieved.iter().take(m).filter(|id| truth.contains(id.as_str())).count();
    hits as f64 / m as f64
}

/// Ranks gallery clouds by ascending chamfer distance to `query` (both in
/// canonical pose), ties broken by id.
pub fn ground_truth_ranking(query: &PointCloud, gallery: &[(String, PointCloud)]) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = gallery
        .par_iter()
        .map(|(id, cloud)| (id.clone(), chamfer_distance(query, cloud)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked
}

pub fn save_gallery(path: &Path, index: &GalleryIndex) -> Result<()> {
    fs::write(path, encode_gallery(index)).map_err(|e| Error::io(path, e))
}

pub fn load_gallery(path: &Path) -> Result<GalleryIndex> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gallery(&bytes)
}

pub fn encode_gallery(index: &GalleryIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());

    crate::retrieval::codebook_io::encode_codebook_fields(&mut out, &index.codebook);

    out.extend_from_slice(&(index.records.len() as u64).to_le_bytes());
    for r in &index.records {
        write_str(&mut out, &r.id);
        write_str(&mut out, &r.category);
        write_str(&mut out, &r.cloud_path);
        out.push(r.vlad.is_degenerate() as u8);
        out.extend_from_slice(&(r.vlad.len() as u64).to_le_bytes());
        for x in r.vlad.values().iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_gallery(bytes: &[u8]) -> Result<GalleryIndex> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::malformed("PCRG", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::malformed("PCRG", format!("unsupported version {version}")));
    }

    let codebook = crate::retrieval::codebook_io::decode_codebook_fields(&mut r)?;

    let count = r.u64()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let id = read_str(&mut r)?;
        let category = read_str(&mut r)?;
        let cloud_path = read_str(&mut r)?;
        let degenerate = r.take(1)?[0] != 0;
        let vlen = r.u64()? as usize;
        let mut values = DVector::zeros(vlen);
        for i in 0..vlen {
            values[i] = r.f64()?;
        }
        records.push(GalleryRecord {
            id,
            category,
            cloud_path,
            vlad: VladVector::from_parts(values, degenerate),
        });
    }
    if !r.at_end() {
        return Err(Error::malformed("PCRG", "trailing bytes after record table"));
    }
    GalleryIndex::validate(&codebook, &records)
        .map_err(|e| Error::malformed("PCRG", format!("invalid index contents: {e}")))?;
    Ok(GalleryIndex { codebook, records })
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn read_str(r: &mut Reader) -> Result<String> {
    let len = r.u64()? as usize;
    let bytes = r.take(len)?;
    String::from_utf8(bytes.to_vec()).map_err(|_| Error::malformed("PCRG", "non-UTF-8 string"))
}
