//! OFF mesh reading and area-weighted surface sampling.

use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// A triangle mesh. Faces with more than three vertices are fan-triangulated
/// at load time; degenerate faces are kept (they carry zero sampling weight).
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn triangle_area(&self, tri: &[usize; 3]) -> f64 {
        let [a, b, c] = *tri;
        let ab: Vector3<f64> = self.vertices[b] - self.vertices[a];
        let ac: Vector3<f64> = self.vertices[c] - self.vertices[a];
        ab.cross(&ac).norm() / 2.0
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }
}

/// Reads an OFF mesh. Accepts both the standard two-line header and the
/// ModelNet variant where the counts share the `OFF` line.
pub fn read_off(path: &Path) -> Result<TriMesh> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate().filter_map(|(n, l)| match l {
        Ok(text) => {
            let content = text.split('#').next().unwrap_or("").trim().to_string();
            if content.is_empty() {
                None
            } else {
                Some(Ok((n + 1, content)))
            }
        }
        Err(e) => Some(Err(Error::io(path, e))),
    });

    let mut next_line = || -> Result<(usize, String)> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::malformed("off", format!("{}: unexpected end of file", path.display())))
    };

    let (_, header) = next_line()?;
    let counts_text = if header == "OFF" {
        next_line()?.1
    } else if let Some(rest) = header.strip_prefix("OFF") {
        // ModelNet files often glue the counts to the magic: "OFF123 456 0".
        rest.trim().to_string()
    } else {
        return Err(Error::malformed("off", format!("{}: missing OFF header", path.display())));
    };

    let counts: Vec<usize> = counts_text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::malformed("off", format!("{}: bad counts line `{counts_text}`", path.display())))?;
    if counts.len() < 2 {
        return Err(Error::malformed("off", format!("{}: counts line needs vertices and faces", path.display())));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (lineno, line) = next_line()?;
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::malformed("off", format!("{}:{}: bad vertex", path.display(), lineno)))?;
        if fields.len() < 3 {
            return Err(Error::malformed("off", format!("{}:{}: vertex needs 3 coordinates", path.display(), lineno)));
        }
        vertices.push(Point3::new(fields[0], fields[1], fields[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (lineno, line) = next_line()?;
        let fields: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::malformed("off", format!("{}:{}: bad face", path.display(), lineno)))?;
        let n = *fields
            .first()
            .ok_or_else(|| Error::malformed("off", format!("{}:{}: empty face", path.display(), lineno)))?;
        if n < 3 || fields.len() < n + 1 {
            return Err(Error::malformed("off", format!("{}:{}: face needs at least 3 vertices", path.display(), lineno)));
        }
        let idx = &fields[1..=n];
        if let Some(&bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(Error::malformed("off", format!("{}:{}: vertex index {bad} out of range", path.display(), lineno)));
        }
        for i in 1..n - 1 {
            triangles.push([idx[0], idx[i], idx[i + 1]]);
        }
    }

    if vertices.is_empty() || triangles.is_empty() {
        return Err(Error::malformed("off", format!("{}: empty mesh", path.display())));
    }
    Ok(TriMesh { vertices, triangles })
}

/// Samples `n` points uniformly over the mesh surface: faces drawn with
/// probability proportional to area, positions uniform by the square-root
/// barycentric trick. Deterministic per seed.
pub fn sample_mesh_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for tri in &mesh.triangles {
        total += mesh.triangle_area(tri);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random_range(0.0..total);
        let face = cumulative.partition_point(|&c| c <= target).min(mesh.triangles.len() - 1);
        let [a, b, c] = mesh.triangles[face];
        let (va, vb, vc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let r1: f64 = rng.random_range(0.0..1.0);
        let r2: f64 = rng.random_range(0.0..1.0);
        let s = r1.sqrt();
        let p = va.coords * (1.0 - s) + vb.coords * (s * (1.0 - r2)) + vc.coords * (s * r2);
        points.push(Point3::from(p));
    }
    PointCloud::new(points)
}
