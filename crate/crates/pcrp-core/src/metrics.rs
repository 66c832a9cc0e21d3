//! Error aggregation and CSV emission for evaluation runs.

use std::path::Path;

use crate::error::{Error, Result};

/// Summary statistics of a nonnegative error sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
}

impl ErrorStats {
    /// Aggregates `values`; `None` for an empty slice. Median of an even
    /// count is the midpoint of the two central order statistics.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mse = values.iter().map(|v| v * v).sum::<f64>() / n;
        let mae = values.iter().map(|v| v.abs()).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        Some(Self { count: values.len(), mean, median, mse, rmse: mse.sqrt(), mae })
    }
}

/// Empirical CDF of `values`: for each distinct value v in ascending order,
/// the fraction of samples ≤ v. The last fraction is exactly 1.
pub fn cumulative_distribution(values: &[f64]) -> Vec<(f64, f64)> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut cdf = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        // Only the last occurrence of a value carries its final fraction.
        if i + 1 == sorted.len() || sorted[i + 1] != v {
            cdf.push((v, (i + 1) as f64 / n));
        }
    }
    cdf
}

/// Renders rows as CSV. Fields containing commas, quotes, or newlines are
/// quoted with doubled inner quotes; everything else is written verbatim.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("in-memory CSV write cannot fail");
    for row in rows {
        writer.write_record(row).expect("in-memory CSV write cannot fail");
    }
    let bytes = writer.into_inner().expect("in-memory CSV flush cannot fail");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    std::fs::write(path, csv_text(header, rows)).map_err(|e| Error::io(path, e))
}
