//! High-level operations: one function per user-facing command. These do the
//! file handling and orchestration; the CLI and the HTTP service are both
//! thin wrappers over this module.
//!
//! Conventions shared by every operation:
//! - Point clouds are used *as stored* for pose reporting, but features are
//!   always extracted from a unit-sphere-normalized copy, so retrieval and
//!   matching are scale- and placement-independent.
//! - Every seeded stage derives its seed from `PipelineConfig::seed`, so one
//!   config reproduces one byte-identical set of artifacts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::frpointhop::{extract_features, fit_model, load_model, save_model, HopConfig};
use crate::geometry::{chamfer_distance, random_rigid_transform, PointCloud, RigidTransform};
use crate::io::{list_split, load_cloud, object_id_from_path, read_off, sample_mesh_surface};
use crate::metrics::{cumulative_distribution, write_csv, ErrorStats};
use crate::registration::{
    estimate_pose, icp_baseline, register_pair, rotation_error_deg, PoseEstimate,
    RegistrationOptions,
};
use crate::retrieval::{
    build_gallery, compute_vlad, fit_codebook, load_codebook, load_gallery, precision_at_m,
    retrieve, save_codebook, save_gallery, GalleryObject,
};

/// Sizes the global worker pool; `0` keeps the rayon default (one worker per
/// CPU). Only the first call in a process takes effect.
pub fn configure_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn hop_config(config: &PipelineConfig) -> HopConfig {
    HopConfig {
        k1: config.k1,
        k2: config.k2,
        fps_ratio: 0.5,
        hop1_energy_threshold: config.hop1_energy_threshold,
        target_dim: config.feature_dim,
        train_points_cap: config.train_points_cap,
    }
}

fn registration_options(config: &PipelineConfig) -> RegistrationOptions {
    RegistrationOptions {
        ransac_iterations: config.ransac_iterations,
        inlier_threshold: config.ransac_inlier_threshold,
        mutual_filter: config.mutual_filter,
        ratio_test: config.ratio_test,
        chamfer_reliability_threshold: config.chamfer_reliability_threshold,
        seed: config.seed,
    }
}

/// Loads a cloud for use as a query or registration input: `.xyz` files are
/// read as stored; `.off` meshes are surface-sampled with the configured
/// point budget and normalized like `sample` output.
pub fn load_input_cloud(path: &Path, config: &PipelineConfig) -> Result<PointCloud> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("off")) {
        let mesh = read_off(path)?;
        let cloud = sample_mesh_surface(&mesh, config.sample_points, config.seed)?;
        Ok(cloud.normalize_to_unit_sphere().0)
    } else {
        load_cloud(path)
    }
}

fn stable_hash(text: &str) -> u64 {
    // FNV-1a: tiny, stable across platforms and releases, good enough for
    // deriving per-object RNG streams.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Pose records

/// One registration result in the text record layout: query id, retrieved
/// id, rotation (row-major), translation, inlier count, RMS residual,
/// chamfer distance, reliability flag.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub query_id: String,
    pub retrieved_id: String,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub inlier_count: usize,
    pub rms_residual: f64,
    pub chamfer: f64,
    pub reliable: bool,
}

impl PoseRecord {
    pub fn from_estimate(query_id: &str, fallback_target: &str, estimate: &PoseEstimate) -> Self {
        let r = estimate.transform.rotation();
        let t = estimate.transform.translation();
        Self {
            query_id: query_id.to_string(),
            retrieved_id: estimate
                .retrieved_id
                .clone()
                .unwrap_or_else(|| fallback_target.to_string()),
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [t.x, t.y, t.z],
            inlier_count: estimate.inlier_count,
            rms_residual: estimate.rms_residual,
            chamfer: estimate.chamfer,
            reliable: estimate.reliable,
        }
    }

    /// Eight `key: value` lines. Floats print in Rust's shortest
    /// round-trippable form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "query: {}", self.query_id);
        let _ = writeln!(out, "retrieved: {}", self.retrieved_id);
        let rot: Vec<String> = self.rotation.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "rotation: {}", rot.join(" "));
        let trans: Vec<String> = self.translation.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "translation: {}", trans.join(" "));
        let _ = writeln!(out, "inliers: {}", self.inlier_count);
        let _ = writeln!(out, "rms_residual: {}", self.rms_residual);
        let _ = writeln!(out, "chamfer: {}", self.chamfer);
        let _ = writeln!(out, "reliable: {}", self.reliable);
        out
    }

    /// Parses one record produced by [`PoseRecord::to_text`]. Blank lines are
    /// skipped; keys must appear in order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut field = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::malformed("pose record", format!("missing `{key}` line")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(':'))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::malformed("pose record", format!("expected `{key}:` line, got `{line}`")))
        };
        let query_id = field("query")?;
        let retrieved_id = field("retrieved")?;
        let rotation = parse_floats::<9>(&field("rotation")?)?;
        let translation = parse_floats::<3>(&field("translation")?)?;
        let inlier_count = field("inliers")?
            .parse()
            .map_err(|_| Error::malformed("pose record", "bad inlier count"))?;
        let rms_residual = parse_float(&field("rms_residual")?)?;
        let chamfer = parse_float(&field("chamfer")?)?;
        let reliable = match field("reliable")?.as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::malformed("pose record", format!("bad reliable flag `{other}`")))
            }
        };
        Ok(Self {
            query_id,
            retrieved_id,
            rotation,
            translation,
            inlier_count,
            rms_residual,
            chamfer,
            reliable,
        })
    }

    pub fn transform(&self) -> Result<RigidTransform> {
        let r = nalgebra::Matrix3::from_row_slice(&self.rotation);
        let t = nalgebra::Vector3::new(self.translation[0], self.translation[1], self.translation[2]);
        RigidTransform::new(r, t)
    }
}

fn parse_float(text: &str) -> Result<f64> {
    text.parse().map_err(|_| Error::malformed("pose record", format!("bad float `{text}`")))
}

fn parse_floats<const N: usize>(text: &str) -> Result<[f64; N]> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(parse_float)
        .collect::<Result<_>>()?;
    values
        .try_into()
        .map_err(|_| Error::malformed("pose record", format!("expected {N} floats in `{text}`")))
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub training_clouds: usize,
    pub hop1_dim: usize,
    pub feature_dim: usize,
    pub hop1_energy: f64,
    pub hop2_energy: f64,
    pub codebook_k: usize,
    pub codebook_inertia: f64,
    pub codebook_iterations: usize,
    pub model_path: PathBuf,
    pub codebook_path: PathBuf,
}

/// Fits the two-hop feature model and the VLAD codebook on the training
/// split, writing both artifacts.
pub fn op_train(
    config: &PipelineConfig,
    model_path: &Path,
    codebook_path: &Path,
) -> Result<TrainReport> {
    config.validate()?;
    let entries = list_split(&config.dataset_dir, &config.categories, "train")?;
    if entries.is_empty() {
        return Err(Error::InvalidConfig("training split contains no clouds".into()));
    }
    let clouds: Vec<PointCloud> = entries
        .par_iter()
        .map(|e| Ok(load_cloud(&e.path)?.normalize_to_unit_sphere().0))
        .collect::<Result<_>>()?;

    let model = fit_model(&clouds, &hop_config(config), config.seed)?;

    // Pool per-point features (capped per cloud) for the codebook.
    let feature_sets: Vec<DMatrix<f64>> = clouds
        .par_iter()
        .map(|cloud| Ok(extract_features(&model, cloud)?.features().clone()))
        .collect::<Result<_>>()?;
    let pooled = pool_rows(&feature_sets, config.codebook_points_cap, config.seed);
    let codebook = fit_codebook(&pooled, config.vlad_k, config.seed)?;

    save_model(model_path, &model)?;
    save_codebook(codebook_path, &codebook)?;

    Ok(TrainReport {
        training_clouds: clouds.len(),
        hop1_dim: model.hop1_kernel().output_dim(),
        feature_dim: model.feature_dim(),
        hop1_energy: model.hop1_kernel().retained_energy_fraction(),
        hop2_energy: model.hop2_kernel().retained_energy_fraction(),
        codebook_k: codebook.k(),
        codebook_inertia: codebook.inertia(),
        codebook_iterations: codebook.iterations(),
        model_path: model_path.to_path_buf(),
        codebook_path: codebook_path.to_path_buf(),
    })
}

/// Stacks up to `cap` rows from each matrix, sampled without replacement
/// with a per-matrix derived seed, preserving row order.
fn pool_rows(sets: &[DMatrix<f64>], cap: usize, seed: u64) -> DMatrix<f64> {
    let dim = sets.first().map_or(0, |s| s.ncols());
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0;
    for (i, set) in sets.iter().enumerate() {
        let n = set.nrows();
        let keep: Vec<usize> = if n <= cap {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64 + 1));
            let mut picked = rand::seq::index::sample(&mut rng, n, cap).into_vec();
            picked.sort_unstable();
            picked
        };
        for r in keep {
            rows.extend(set.row(r).iter().copied());
            count += 1;
        }
    }
    DMatrix::from_row_slice(count, dim, &rows)
}

// ---------------------------------------------------------------------------
// index

#[derive(Debug, Clone)]
pub struct IndexReport {
    pub records: usize,
    pub categories: Vec<(String, usize)>,
    pub degenerate: usize,
    pub index_path: PathBuf,
}

/// Builds the gallery index over the configured gallery split and writes it.
pub fn op_index(
    config: &PipelineConfig,
    model_path: &Path,
    codebook_path: &Path,
    index_path: &Path,
) -> Result<IndexReport> {
    config.validate()?;
    let model = load_model(model_path)?;
    let codebook = load_codebook(codebook_path)?;
    let entries = list_split(&config.dataset_dir, &config.categories, &config.gallery_split)?;
    if entries.is_empty() {
        return Err(Error::EmptyGallery);
    }

    let objects: Vec<GalleryObject> = entries
        .par_iter()
        .map(|e| {
            let cloud = load_cloud(&e.path)?.normalize_to_unit_sphere().0;
            Ok(GalleryObject {
                id: format!("{}/{}", e.category, e.id),
                category: e.category.clone(),
                cloud,
                cloud_path: e.path.to_string_lossy().into_owned(),
            })
        })
        .collect::<Result<_>>()?;
    let index = build_gallery(&model, &codebook, &objects)?;
    save_gallery(index_path, &index)?;

    let mut categories: Vec<(String, usize)> = Vec::new();
    for record in index.records() {
        match categories.iter_mut().find(|(c, _)| c == &record.category) {
            Some((_, n)) => *n += 1,
            None => categories.push((record.category.clone(), 1)),
        }
    }
    let degenerate = index.records().iter().filter(|r| r.vlad.is_degenerate()).count();
    Ok(IndexReport {
        records: index.len(),
        categories,
        degenerate,
        index_path: index_path.to_path_buf(),
    })
}

// ---------------------------------------------------------------------------
// query

#[derive(Debug, Clone)]
pub struct QueryHit {
    pub id: String,
    pub category: String,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct QueryReport {
    pub query_id: String,
    pub hits: Vec<QueryHit>,
    pub pose: Option<PoseRecord>,
}

/// Retrieves the top-`m` gallery matches for one query cloud and, unless
/// `with_pose` is off, registers the query against the top-1 match.
pub fn op_query(
    config: &PipelineConfig,
    model_path: &Path,
    index_path: &Path,
    query_path: &Path,
    m: usize,
    with_pose: bool,
) -> Result<QueryReport> {
    config.validate()?;
    let model = load_model(model_path)?;
    let index = load_gallery(index_path)?;
    let query = load_input_cloud(query_path, config)?;
    let query_id = object_id_from_path(query_path);

    let normalized = query.normalize_to_unit_sphere().0;
    let features = extract_features(&model, &normalized)?;
    let vlad = compute_vlad(index.codebook(), features.features())?;
    let hits: Vec<QueryHit> = retrieve(&index, &vlad, m)
        .into_iter()
        .map(|hit| {
            let record = index.record(hit.record);
            QueryHit {
                id: record.id.clone(),
                category: record.category.clone(),
                distance: hit.distance,
            }
        })
        .collect();

    let pose = if with_pose {
        let estimate = estimate_pose(
            &model,
            &index,
            &query,
            |record| load_cloud(&resolve_cloud_path(index_path, &record.cloud_path)),
            &registration_options(config),
        )?;
        Some(PoseRecord::from_estimate(&query_id, "", &estimate))
    } else {
        None
    };

    Ok(QueryReport { query_id, hits, pose })
}

/// Cloud paths inside an index are stored as given at indexing time. Absolute
/// paths and paths valid from the current directory are used directly;
/// otherwise the path is resolved relative to the index file's directory.
fn resolve_cloud_path(index_path: &Path, stored: &str) -> PathBuf {
    let direct = PathBuf::from(stored);
    if direct.is_absolute() || direct.exists() {
        return direct;
    }
    match index_path.parent() {
        Some(parent) => parent.join(stored),
        None => direct,
    }
}

// ---------------------------------------------------------------------------
// register

/// Registers `source` onto `target` directly (no retrieval). With `use_icp`
/// the baseline point-to-point ICP runs instead of the feature pipeline.
pub fn op_register(
    config: &PipelineConfig,
    model_path: &Path,
    source_path: &Path,
    target_path: &Path,
    use_icp: bool,
) -> Result<PoseRecord> {
    config.validate()?;
    let source = load_input_cloud(source_path, config)?;
    let target = load_input_cloud(target_path, config)?;
    let source_id = object_id_from_path(source_path);
    let target_id = object_id_from_path(target_path);

    if use_icp {
        let result = icp_baseline(&source, &target, ICP_MAX_ITERATIONS, ICP_TOLERANCE)?;
        return Ok(icp_record(&source_id, &target_id, &source, &target, &result, config));
    }

    let model = load_model(model_path)?;
    let estimate = register_pair(&model, &source, &target, &registration_options(config))?;
    Ok(PoseRecord::from_estimate(&source_id, &target_id, &estimate))
}

const ICP_MAX_ITERATIONS: usize = 200;
const ICP_TOLERANCE: f64 = 1e-9;

/// Wraps an ICP run in the common record layout. Every source point takes
/// part in ICP, so the inlier count is the cloud size; the chamfer is
/// measured in the target's normalized frame so the reliability threshold
/// means the same thing as in the feature pipeline.
fn icp_record(
    source_id: &str,
    target_id: &str,
    source: &PointCloud,
    target: &PointCloud,
    result: &crate::registration::IcpResult,
    config: &PipelineConfig,
) -> PoseRecord {
    let aligned = source.transformed(&result.transform);
    let (_, target_centroid, target_scale) = target.normalize_to_unit_sphere();
    let to_norm = |cloud: &PointCloud| {
        PointCloud::new(
            cloud
                .points()
                .iter()
                .map(|p| nalgebra::Point3::from((p - target_centroid) / target_scale))
                .collect(),
        )
        .expect("normalization preserves validity")
    };
    let chamfer = chamfer_distance(&to_norm(&aligned), &to_norm(target));
    let reliable = chamfer <= config.chamfer_reliability_threshold;

    let index = crate::geometry::SpatialIndex::build(target);
    let rms = (aligned
        .points()
        .iter()
        .map(|p| {
            let (_, d) = index.nearest(p);
            d * d
        })
        .sum::<f64>()
        / aligned.len() as f64)
        .sqrt();

    let estimate = PoseEstimate {
        transform: result.transform.clone(),
        inlier_count: source.len(),
        rms_residual: rms,
        chamfer,
        reliable,
        retrieved_id: None,
        side_consistent: true,
    };
    PoseRecord::from_estimate(source_id, target_id, &estimate)
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Precision@M cut-off and retrieval depth.
    pub m: usize,
    /// Apply a per-query random rigid transform before querying, storing it
    /// as the ground truth.
    pub arbitrary_pose: bool,
    /// Evaluate only the first `limit` queries of the sorted listing.
    pub limit: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { m: 10, arbitrary_pose: false, limit: None }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub queries: usize,
    pub failures: usize,
    pub precision_mean: f64,
    pub top1_chamfer_mean: f64,
    pub rotation: Option<ErrorStats>,
    pub translation: Option<ErrorStats>,
    pub reliable_fraction: f64,
    pub metrics_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub cdf_csv: PathBuf,
    pub poses_path: PathBuf,
}

struct EvalRow {
    query_id: String,
    category: String,
    retrieved_id: String,
    retrieved_category: String,
    precision: f64,
    top1_chamfer: f64,
    pose: Option<PoseOutcome>,
    ground_truth: RigidTransform,
}

struct PoseOutcome {
    record: PoseRecord,
    rotation_error: f64,
    translation_error: f64,
}

/// Evaluates retrieval and registration over the configured query split,
/// writing `metrics.csv` (one row per query), `summary.csv`,
/// `rotation_cdf.csv`, and `poses.txt` into `output_dir`.
pub fn op_eval(
    config: &PipelineConfig,
    model_path: &Path,
    index_path: &Path,
    output_dir: &Path,
    options: &EvalOptions,
) -> Result<EvalReport> {
    config.validate()?;
    if options.m == 0 {
        return Err(Error::InvalidConfig("eval needs m >= 1".into()));
    }
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let model = load_model(model_path)?;
    let index = load_gallery(index_path)?;

    // Gallery clouds, loaded once: normalized copies drive the chamfer
    // ground truth, as-stored copies are the registration targets.
    let gallery_clouds: Vec<(String, PointCloud, PointCloud)> = index
        .records()
        .par_iter()
        .map(|record| {
            let stored = load_cloud(&resolve_cloud_path(index_path, &record.cloud_path))?;
            let normalized = stored.normalize_to_unit_sphere().0;
            Ok((record.id.clone(), stored, normalized))
        })
        .collect::<Result<_>>()?;
    let stored_by_id: HashMap<&str, &PointCloud> =
        gallery_clouds.iter().map(|(id, stored, _)| (id.as_str(), stored)).collect();
    let normalized_by_id: HashMap<&str, &PointCloud> =
        gallery_clouds.iter().map(|(id, _, n)| (id.as_str(), n)).collect();
    let gt_pool: Vec<(String, PointCloud)> =
        gallery_clouds.iter().map(|(id, _, n)| (id.clone(), n.clone())).collect();

    let mut entries = list_split(&config.dataset_dir, &config.categories, &config.query_split)?;
    if let Some(limit) = options.limit {
        entries.truncate(limit);
    }
    if entries.is_empty() {
        return Err(Error::InvalidConfig("query split contains no clouds".into()));
    }

    let reg_options = registration_options(config);
    let rows: Vec<Result<EvalRow>> = entries
        .par_iter()
        .map(|entry| {
            let canonical = load_cloud(&entry.path)?;
            let query_id = format!("{}/{}", entry.category, entry.id);
            let ground_truth = if options.arbitrary_pose {
                random_rigid_transform(config.seed ^ stable_hash(&query_id), 180.0, 0.5)
            } else {
                RigidTransform::identity()
            };
            let posed = canonical.transformed(&ground_truth);

            // Retrieval on the posed query.
            let normalized = posed.normalize_to_unit_sphere().0;
            let features = extract_features(&model, &normalized)?;
            let vlad = compute_vlad(index.codebook(), features.features())?;
            let hits = retrieve(&index, &vlad, options.m);
            let retrieved: Vec<String> =
                hits.iter().map(|h| index.record(h.record).id.clone()).collect();
            let top1 = index.record(hits[0].record);

            // Ground-truth ranking and Precision@M use the canonical query.
            let canonical_norm = canonical.normalize_to_unit_sphere().0;
            let truth_ids: Vec<String> = crate::retrieval::ground_truth_ranking(
                &canonical_norm,
                &gt_pool,
            )
            .into_iter()
            .map(|(id, _)| id)
            .collect();
            let precision = precision_at_m(&retrieved, &truth_ids, options.m);
            let top1_chamfer =
                chamfer_distance(&canonical_norm, normalized_by_id[top1.id.as_str()]);

            // Registration against the retrieved object.
            let pose = match estimate_pose(
                &model,
                &index,
                &posed,
                |record| Ok((*stored_by_id[record.id.as_str()]).clone()),
                &reg_options,
            ) {
                Ok(estimate) => {
                    let expected = ground_truth.inverse();
                    Some(PoseOutcome {
                        rotation_error: rotation_error_deg(
                            estimate.transform.rotation(),
                            expected.rotation(),
                        ),
                        translation_error: (estimate.transform.translation()
                            - expected.translation())
                        .norm(),
                        record: PoseRecord::from_estimate(&query_id, &top1.id, &estimate),
                    })
                }
                Err(error) => {
                    tracing::warn!(query = %query_id, %error, "registration failed");
                    None
                }
            };

            Ok(EvalRow {
                query_id,
                category: entry.category.clone(),
                retrieved_id: top1.id.clone(),
                retrieved_category: top1.category.clone(),
                precision,
                top1_chamfer,
                pose,
                ground_truth,
            })
        })
        .collect();
    let rows: Vec<EvalRow> = rows.into_iter().collect::<Result<_>>()?;

    write_eval_outputs(config, options, output_dir, &rows)
}

fn write_eval_outputs(
    config: &PipelineConfig,
    options: &EvalOptions,
    output_dir: &Path,
    rows: &[EvalRow],
) -> Result<EvalReport> {
    let metrics_csv = output_dir.join("metrics.csv");
    let summary_csv = output_dir.join("summary.csv");
    let cdf_csv = output_dir.join("rotation_cdf.csv");
    let poses_path = output_dir.join("poses.txt");

    let header = [
        "query_id",
        "category",
        "retrieved_id",
        "retrieved_category",
        "precision_at_m",
        "top1_chamfer",
        "rotation_error_deg",
        "translation_error",
        "inlier_count",
        "rms_residual",
        "registration_chamfer",
        "reliable",
        "gt_r00",
        "gt_r01",
        "gt_r02",
        "gt_r10",
        "gt_r11",
        "gt_r12",
        "gt_r20",
        "gt_r21",
        "gt_r22",
        "gt_tx",
        "gt_ty",
        "gt_tz",
    ];
    let mut csv_rows = Vec::with_capacity(rows.len());
    let mut poses_text = String::new();
    let mut rotation_errors = Vec::new();
    let mut translation_errors = Vec::new();
    let mut reliable = 0usize;
    let mut failures = 0usize;

    for row in rows {
        let mut fields = vec![
            row.query_id.clone(),
            row.category.clone(),
            row.retrieved_id.clone(),
            row.retrieved_category.clone(),
            row.precision.to_string(),
            row.top1_chamfer.to_string(),
        ];
        match &row.pose {
            Some(outcome) => {
                rotation_errors.push(outcome.rotation_error);
                translation_errors.push(outcome.translation_error);
                reliable += outcome.record.reliable as usize;
                fields.extend([
                    outcome.rotation_error.to_string(),
                    outcome.translation_error.to_string(),
                    outcome.record.inlier_count.to_string(),
                    outcome.record.rms_residual.to_string(),
                    outcome.record.chamfer.to_string(),
                    outcome.record.reliable.to_string(),
                ]);
                poses_text.push_str(&outcome.record.to_text());
                poses_text.push('\n');
            }
            None => {
                failures += 1;
                fields.extend(std::iter::repeat_n(String::new(), 6));
            }
        }
        let r = row.ground_truth.rotation();
        for i in 0..3 {
            for j in 0..3 {
                fields.push(r[(i, j)].to_string());
            }
        }
        let t = row.ground_truth.translation();
        fields.extend([t.x.to_string(), t.y.to_string(), t.z.to_string()]);
        csv_rows.push(fields);
    }
    write_csv(&metrics_csv, &header, &csv_rows)?;
    std::fs::write(&poses_path, poses_text).map_err(|e| Error::io(&poses_path, e))?;

    let cdf = cumulative_distribution(&rotation_errors);
    let cdf_rows: Vec<Vec<String>> =
        cdf.iter().map(|(v, f)| vec![v.to_string(), f.to_string()]).collect();
    write_csv(&cdf_csv, &["rotation_error_deg", "fraction"], &cdf_rows)?;

    let precision_mean = rows.iter().map(|r| r.precision).sum::<f64>() / rows.len() as f64;
    let top1_chamfer_mean = rows.iter().map(|r| r.top1_chamfer).sum::<f64>() / rows.len() as f64;
    let rotation = ErrorStats::from_values(&rotation_errors);
    let translation = ErrorStats::from_values(&translation_errors);
    let registered = rows.len() - failures;
    let reliable_fraction = if registered > 0 { reliable as f64 / registered as f64 } else { 0.0 };

    let mut summary_rows: Vec<Vec<String>> = vec![
        vec!["queries".into(), rows.len().to_string()],
        vec!["failures".into(), failures.to_string()],
        vec![format!("precision_at_{}_mean", options.m), precision_mean.to_string()],
        vec!["top1_chamfer_mean".into(), top1_chamfer_mean.to_string()],
        vec!["reliable_fraction".into(), reliable_fraction.to_string()],
        vec!["arbitrary_pose".into(), options.arbitrary_pose.to_string()],
        vec!["seed".into(), config.seed.to_string()],
    ];
    if let Some(stats) = &rotation {
        summary_rows.extend([
            vec!["rotation_mean_deg".into(), stats.mean.to_string()],
            vec!["rotation_median_deg".into(), stats.median.to_string()],
            vec!["rotation_mse".into(), stats.mse.to_string()],
            vec!["rotation_rmse".into(), stats.rmse.to_string()],
            vec!["rotation_mae".into(), stats.mae.to_string()],
        ]);
    }
    if let Some(stats) = &translation {
        summary_rows.extend([
            vec!["translation_mse".into(), stats.mse.to_string()],
            vec!["translation_rmse".into(), stats.rmse.to_string()],
            vec!["translation_mae".into(), stats.mae.to_string()],
        ]);
    }
    write_csv(&summary_csv, &["metric", "value"], &summary_rows)?;

    Ok(EvalReport {
        queries: rows.len(),
        failures,
        precision_mean,
        top1_chamfer_mean,
        rotation,
        translation,
        reliable_fraction,
        metrics_csv,
        summary_csv,
        cdf_csv,
        poses_path,
    })
}

// ---------------------------------------------------------------------------
// sample

#[derive(Debug, Clone)]
pub struct SampleReport {
    pub meshes: usize,
    pub points_per_cloud: usize,
    pub outputs: Vec<PathBuf>,
}

/// Samples OFF meshes into normalized XYZ clouds. A file input produces one
/// output file; a directory is walked recursively and its `.off` tree is
/// mirrored under `output` with `.xyz` extensions. Each mesh gets an RNG
/// stream derived from the base seed and its relative path, so outputs do
/// not depend on traversal order.
pub fn op_sample(config: &PipelineConfig, input: &Path, output: &Path) -> Result<SampleReport> {
    let n = config.sample_points;
    if n == 0 {
        return Err(Error::InvalidConfig("sample_points must be positive".into()));
    }

    if input.is_file() {
        let out_path = if output.extension().is_some() {
            output.to_path_buf()
        } else {
            std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
            output.join(input.file_stem().unwrap_or_default()).with_extension("xyz")
        };
        sample_one(input, &out_path, n, config.seed)?;
        return Ok(SampleReport { meshes: 1, points_per_cloud: n, outputs: vec![out_path] });
    }

    let mut meshes = Vec::new();
    collect_off_files(input, input, &mut meshes)?;
    meshes.sort();
    if meshes.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no .off meshes under {}",
            input.display()
        )));
    }
    let outputs: Vec<PathBuf> = meshes
        .par_iter()
        .map(|rel| {
            let out_path = output.join(rel).with_extension("xyz");
            if let Some(parent) = out_path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let seed = config.seed ^ stable_hash(&rel.to_string_lossy());
            sample_one(&input.join(rel), &out_path, n, seed)?;
            Ok(out_path)
        })
        .collect::<Result<_>>()?;
    Ok(SampleReport { meshes: outputs.len(), points_per_cloud: n, outputs })
}

fn sample_one(mesh_path: &Path, out_path: &Path, n: usize, seed: u64) -> Result<()> {
    let mesh = read_off(mesh_path)?;
    let cloud = sample_mesh_surface(&mesh, n, seed)?.normalize_to_unit_sphere().0;
    crate::io::write_xyz(out_path, &cloud)
}

fn collect_off_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_off_files(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("off")) {
            let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
            out.push(rel);
        }
    }
    Ok(())
}
