//! XYZ text format: one point per line, three whitespace-separated floats,
//! `#` starts a comment.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::malformed(
                "xyz",
                format!("{}:{}: expected 3 fields, got {}", path.display(), lineno + 1, fields.len()),
            ));
        }
        let mut coords = [0.0f64; 3];
        for (c, field) in coords.iter_mut().zip(&fields) {
            *c = field.parse().map_err(|_| {
                Error::malformed("xyz", format!("{}:{}: bad float `{field}`", path.display(), lineno + 1))
            })?;
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    if points.is_empty() {
        return Err(Error::malformed("xyz", format!("{}: no points", path.display())));
    }
    PointCloud::new(points)
}

pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for p in cloud.points() {
        // {:.17e} keeps f64 round-trips exact.
        writeln!(writer, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z).map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
