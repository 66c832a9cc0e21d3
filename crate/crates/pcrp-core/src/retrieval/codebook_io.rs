//! Standalone codebook file format ("PCRC"). The gallery index embeds the
//! same field layout, so the two formats stay byte-compatible.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frpointhop::Reader;
use crate::retrieval::kmeans::VladCodebook;

const MAGIC: &[u8; 4] = b"PCRC";
const VERSION: u32 = 1;

/// Appends the codebook field block: k, dim, iterations, seed, inertia,
/// centroids row-major, all little-endian.
pub(crate) fn encode_codebook_fields(out: &mut Vec<u8>, codebook: &VladCodebook) {
    out.extend_from_slice(&(codebook.k() as u32).to_le_bytes());
    out.extend_from_slice(&(codebook.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(codebook.iterations() as u64).to_le_bytes());
    out.extend_from_slice(&codebook.seed().to_le_bytes());
    out.extend_from_slice(&codebook.inertia().to_le_bytes());
    for i in 0..codebook.k() {
        for j in 0..codebook.dim() {
            out.extend_from_slice(&codebook.centroids()[(i, j)].to_le_bytes());
        }
    }
}

pub(crate) fn decode_codebook_fields(r: &mut Reader) -> Result<VladCodebook> {
    let k = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let iterations = r.u64()? as usize;
    let seed = r.u64()?;
    let inertia = r.f64()?;
    let mut centroids = DMatrix::zeros(k, dim);
    for i in 0..k {
        for j in 0..dim {
            centroids[(i, j)] = r.f64()?;
        }
    }
    Ok(VladCodebook::from_parts(centroids, inertia, iterations, seed))
}

pub fn encode_codebook(codebook: &VladCodebook) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    encode_codebook_fields(&mut out, codebook);
    out
}

pub fn decode_codebook(bytes: &[u8]) -> Result<VladCodebook> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::malformed("PCRC", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::malformed("PCRC", format!("unsupported version {version}")));
    }
    let codebook = decode_codebook_fields(&mut r)?;
    if !r.at_end() {
        return Err(Error::malformed("PCRC", "trailing bytes after centroid table"));
    }
    if codebook.k() == 0 || codebook.dim() == 0 {
        return Err(Error::malformed("PCRC", "empty codebook"));
    }
    Ok(codebook)
}

pub fn save_codebook(path: &Path, codebook: &VladCodebook) -> Result<()> {
    fs::write(path, encode_codebook(codebook)).map_err(|e| Error::io(path, e))
}

pub fn load_codebook(path: &Path) -> Result<VladCodebook> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_codebook(&bytes)
}
