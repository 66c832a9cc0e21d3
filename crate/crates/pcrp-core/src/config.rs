//! Run configuration: a flat `key = value` text file with CLI overrides.
//!
//! Every parameter that affects an artifact lives here so a run is fully
//! described by one file plus a seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All tunable parameters of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Hop-1 neighborhood size (FPFH and local reference frames).
    pub k1: usize,
    /// Hop-2 octant-pooling neighborhood size.
    pub k2: usize,
    /// Cumulative energy kept by the hop-1 Saab truncation.
    pub hop1_energy_threshold: f64,
    /// Total per-point feature dimension produced by hop 2.
    pub feature_dim: usize,
    /// Max attribute rows pooled per cloud when fitting Saab kernels.
    pub train_points_cap: usize,
    /// Number of VLAD codewords.
    pub vlad_k: usize,
    /// Max point features pooled per cloud when fitting the codebook.
    pub codebook_points_cap: usize,
    /// RANSAC iteration count.
    pub ransac_iterations: usize,
    /// RANSAC inlier distance threshold, in unit-sphere units.
    pub ransac_inlier_threshold: f64,
    /// Keep only mutual feature-space nearest neighbors as correspondences.
    pub mutual_filter: bool,
    /// Lowe-style ratio test on feature distances; 0 disables it.
    pub ratio_test: f64,
    /// Post-registration chamfer distance above which a pose is unreliable.
    pub chamfer_reliability_threshold: f64,
    /// Points sampled per mesh surface.
    pub sample_points: usize,
    /// Base RNG seed for every seeded stage.
    pub seed: u64,
    /// Worker threads; 0 picks the number of CPUs.
    pub threads: usize,
    /// Root of a ModelNet-style dataset (`category/train`, `category/test`).
    pub dataset_dir: PathBuf,
    /// Categories included in training/gallery/query sets.
    pub categories: Vec<String>,
    /// Dataset split used to build the gallery.
    pub gallery_split: String,
    /// Dataset split queried during evaluation.
    pub query_split: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k1: 64,
            k2: 32,
            hop1_energy_threshold: 0.95,
            feature_dim: 200,
            train_points_cap: 2000,
            vlad_k: 10,
            codebook_points_cap: 500,
            ransac_iterations: 2000,
            ransac_inlier_threshold: 0.05,
            mutual_filter: true,
            ratio_test: 0.0,
            chamfer_reliability_threshold: 0.15,
            sample_points: 2048,
            seed: 0,
            threads: 0,
            dataset_dir: PathBuf::new(),
            categories: ["airplane", "chair", "sofa", "car"].map(String::from).to_vec(),
            gallery_split: "train".into(),
            query_split: "test".into(),
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// Applies `key = value` lines on top of the current values. `#` starts
    /// a comment; blank lines are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    /// Sets a single parameter from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "k1" => self.k1 = parse(key, value)?,
            "k2" => self.k2 = parse(key, value)?,
            "hop1_energy_threshold" => self.hop1_energy_threshold = parse(key, value)?,
            "feature_dim" => self.feature_dim = parse(key, value)?,
            "train_points_cap" => self.train_points_cap = parse(key, value)?,
            "vlad_k" => self.vlad_k = parse(key, value)?,
            "codebook_points_cap" => self.codebook_points_cap = parse(key, value)?,
            "ransac_iterations" => self.ransac_iterations = parse(key, value)?,
            "ransac_inlier_threshold" => self.ransac_inlier_threshold = parse(key, value)?,
            "mutual_filter" => self.mutual_filter = parse(key, value)?,
            "ratio_test" => self.ratio_test = parse(key, value)?,
            "chamfer_reliability_threshold" => {
                self.chamfer_reliability_threshold = parse(key, value)?
            }
            "sample_points" => self.sample_points = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "dataset_dir" => self.dataset_dir = PathBuf::from(value),
            "categories" => {
                self.categories = value
                    .split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect()
            }
            "gallery_split" => self.gallery_split = value.to_string(),
            "query_split" => self.query_split = value.to_string(),
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k1 < 8 {
            problems.push("k1 must be at least 8");
        }
        if self.k2 < 8 {
            problems.push("k2 must be at least 8");
        }
        if !(self.hop1_energy_threshold > 0.0 && self.hop1_energy_threshold <= 1.0) {
            problems.push("hop1_energy_threshold must lie in (0, 1]");
        }
        if self.feature_dim == 0 {
            problems.push("feature_dim must be positive");
        }
        if self.vlad_k == 0 {
            problems.push("vlad_k must be positive");
        }
        if self.ransac_iterations == 0 {
            problems.push("ransac_iterations must be positive");
        }
        if self.ransac_inlier_threshold <= 0.0 {
            problems.push("ransac_inlier_threshold must be positive");
        }
        if self.sample_points == 0 {
            problems.push("sample_points must be positive");
        }
        if self.categories.is_empty() {
            problems.push("categories must not be empty");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    /// Renders the config in its file format (sorted keys).
    pub fn to_text(&self) -> String {
        let mut entries = BTreeMap::new();
        entries.insert("k1", self.k1.to_string());
        entries.insert("k2", self.k2.to_string());
        entries.insert("hop1_energy_threshold", self.hop1_energy_threshold.to_string());
        entries.insert("feature_dim", self.feature_dim.to_string());
        entries.insert("train_points_cap", self.train_points_cap.to_string());
        entries.insert("vlad_k", self.vlad_k.to_string());
        entries.insert("codebook_points_cap", self.codebook_points_cap.to_string());
        entries.insert("ransac_iterations", self.ransac_iterations.to_string());
        entries.insert("ransac_inlier_threshold", self.ransac_inlier_threshold.to_string());
        entries.insert("mutual_filter", self.mutual_filter.to_string());
        entries.insert("ratio_test", self.ratio_test.to_string());
        entries.insert(
            "chamfer_reliability_threshold",
            self.chamfer_reliability_threshold.to_string(),
        );
        entries.insert("sample_points", self.sample_points.to_string());
        entries.insert("seed", self.seed.to_string());
        entries.insert("threads", self.threads.to_string());
        entries.insert("dataset_dir", self.dataset_dir.display().to_string());
        entries.insert("categories", self.categories.join(","));
        entries.insert("gallery_split", self.gallery_split.clone());
        entries.insert("query_split", self.query_split.clone());

        let mut out = String::new();
        for (key, value) in entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}
