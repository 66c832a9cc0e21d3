//! Model bundle persistence.
//!
//! Layout: magic `PCRP`, format version (u32 LE), then three length-prefixed
//! sections — hop config, hop-1 kernel, hop-2 kernel. Every integer is
//! little-endian; every float is IEEE-754 binary64 little-endian; matrices
//! are row-major with explicit dimension headers. Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::model::{FrPointHopModel, HopConfig};
use super::saab::SaabKernel;

const MAGIC: &[u8; 4] = b"PCRP";
const VERSION: u32 = 1;

pub fn save_model(path: &Path, model: &FrPointHopModel) -> Result<()> {
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<FrPointHopModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

pub fn encode_model(model: &FrPointHopModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    write_section(&mut out, &encode_config(model.config()));
    write_section(&mut out, &encode_kernel(model.hop1_kernel()));
    write_section(&mut out, &encode_kernel(model.hop2_kernel()));
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<FrPointHopModel> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::malformed("PCRP", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::malformed("PCRP", format!("unsupported version {version}")));
    }
    let config = decode_config(&mut Reader::new(r.section()?))?;
    let hop1 = decode_kernel(&mut Reader::new(r.section()?))?;
    let hop2 = decode_kernel(&mut Reader::new(r.section()?))?;
    if !r.at_end() {
        return Err(Error::malformed("PCRP", "trailing bytes after last section"));
    }
    Ok(FrPointHopModel::from_parts(config, hop1, hop2))
}

fn write_section(out: &mut Vec<u8>, payload: &[u8]) {
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn encode_config(config: &HopConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(config.k1 as u32).to_le_bytes());
    out.extend_from_slice(&(config.k2 as u32).to_le_bytes());
    out.extend_from_slice(&(config.target_dim as u32).to_le_bytes());
    out.extend_from_slice(&(config.train_points_cap as u32).to_le_bytes());
    out.extend_from_slice(&config.fps_ratio.to_le_bytes());
    out.extend_from_slice(&config.hop1_energy_threshold.to_le_bytes());
    out
}

fn decode_config(r: &mut Reader) -> Result<HopConfig> {
    let config = HopConfig {
        k1: r.u32()? as usize,
        k2: r.u32()? as usize,
        target_dim: r.u32()? as usize,
        train_points_cap: r.u32()? as usize,
        fps_ratio: r.f64()?,
        hop1_energy_threshold: r.f64()?,
    };
    r.expect_end("config")?;
    Ok(config)
}

fn encode_kernel(kernel: &SaabKernel) -> Vec<u8> {
    let d_in = kernel.input_dim();
    let n_ac = kernel.ac_kernels().nrows();
    let mut out = Vec::new();
    out.extend_from_slice(&(d_in as u32).to_le_bytes());
    out.extend_from_slice(&(n_ac as u32).to_le_bytes());
    out.extend_from_slice(&(kernel.full_rank() as u32).to_le_bytes());
    out.extend_from_slice(&kernel.dc_energy_fraction().to_le_bytes());
    for x in kernel.mean().iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for x in kernel.ac_energy_fractions() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for i in 0..n_ac {
        for j in 0..d_in {
            out.extend_from_slice(&kernel.ac_kernels()[(i, j)].to_le_bytes());
        }
    }
    out
}

fn decode_kernel(r: &mut Reader) -> Result<SaabKernel> {
    let d_in = r.u32()? as usize;
    let n_ac = r.u32()? as usize;
    let full_rank = r.u32()? as usize;
    let dc_energy_fraction = r.f64()?;
    let mut mean = DVector::zeros(d_in);
    for i in 0..d_in {
        mean[i] = r.f64()?;
    }
    let mut ac_energy_fractions = Vec::with_capacity(n_ac);
    for _ in 0..n_ac {
        ac_energy_fractions.push(r.f64()?);
    }
    let mut ac_kernels = DMatrix::zeros(n_ac, d_in);
    for i in 0..n_ac {
        for j in 0..d_in {
            ac_kernels[(i, j)] = r.f64()?;
        }
    }
    r.expect_end("kernel")?;
    Ok(SaabKernel::from_parts(mean, ac_kernels, dc_energy_fraction, ac_energy_fractions, full_rank))
}

/// Bounds-checked little-endian cursor shared by the bundle decoders.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::malformed("PCRP", "unexpected end of file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A length-prefixed byte section.
    pub(crate) fn section(&mut self) -> Result<&'a [u8]> {
        let len = self.u64()? as usize;
        self.take(len)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn expect_end(&self, what: &str) -> Result<()> {
        if !self.at_end() {
            return Err(Error::malformed("PCRP", format!("oversized {what} section")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frpointhop::model::fit_model;
    use crate::geometry::PointCloud;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn fitted_model() -> FrPointHopModel {
        let mut rng = StdRng::seed_from_u64(77);
        let clouds: Vec<PointCloud> = (0..3)
            .map(|_| {
                let rows: Vec<[f64; 3]> = (0..220)
                    .map(|_| {
                        let x: f64 = rng.random_range(-1.0..1.0);
                        let y: f64 = rng.random_range(-1.0..1.0);
                        [x, y, (3.0 * x).sin() * 0.4 + 0.3 * y * y]
                    })
                    .collect();
                PointCloud::from_rows(&rows).unwrap()
            })
            .collect();
        let config = crate::frpointhop::HopConfig {
            k1: 16,
            k2: 8,
            fps_ratio: 0.5,
            hop1_energy_threshold: 0.95,
            target_dim: 32,
            train_points_cap: 500,
        };
        fit_model(&clouds, &config, 5).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = fitted_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pcrp");
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(encode_model(&model), encode_model(&loaded));
        assert_eq!(model, loaded);
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let model = fitted_model();
        let good = encode_model(&model);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(decode_model(&bad_magic).is_err());

        let mut bad_version = good.clone();
        bad_version[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(decode_model(&bad_version).is_err());

        let truncated = &good[..good.len() - 3];
        assert!(decode_model(truncated).is_err());

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(decode_model(&trailing).is_err());
    }
}
