//! HTTP service exposing the pipeline operations over JSON.
//!
//! Endpoints mirror the operation layer one-to-one: `POST /api/train`,
//! `/api/index`, `/api/query`, `/api/register`, `/api/eval`, `/api/sample`,
//! plus `GET /api/health`. Bodies are defined in `pcrp-client`. File paths
//! in requests are resolved on the service host.
//!
//! Heavy work runs on the blocking pool, so the async workers stay free; the
//! rayon pool is shared process-wide and sized once at startup.

use axum::extract::Json;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

pub use pcrp_core as core;

use pcrp_core::config::PipelineConfig;
use pcrp_core::ops;
use pcrp_client as wire;

pub fn router() -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/train", post(train))
        .route("/api/index", post(index))
        .route("/api/query", post(query))
        .route("/api/register", post(register))
        .route("/api/eval", post(eval))
        .route("/api/sample", post(sample))
}

/// Serves the API on an already-bound listener until the task is dropped.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

struct ApiError {
    status: StatusCode,
    body: wire::ErrorBody,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<pcrp_core::Error> for ApiError {
    fn from(error: pcrp_core::Error) -> Self {
        use pcrp_core::Error as E;
        let (status, kind) = match &error {
            E::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            E::MalformedFile { .. } => (StatusCode::BAD_REQUEST, "malformed_file"),
            E::Io { .. } => (StatusCode::BAD_REQUEST, "io"),
            E::DuplicateId(_) => (StatusCode::BAD_REQUEST, "duplicate_id"),
            E::EmptyGallery => (StatusCode::BAD_REQUEST, "empty_gallery"),
            E::EmptyCloud => (StatusCode::UNPROCESSABLE_ENTITY, "empty_cloud"),
            E::InvalidCloud(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_cloud"),
            E::SampleTooLarge { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "sample_too_large"),
            E::DimensionMismatch { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "dimension_mismatch")
            }
            E::InsufficientSamples { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_samples")
            }
            E::Degenerate(_) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate"),
        };
        ApiError {
            status,
            body: wire::ErrorBody { kind: kind.into(), message: error.to_string() },
        }
    }
}

fn parse_config(text: &str) -> Result<PipelineConfig, ApiError> {
    let mut config = PipelineConfig::default();
    config.apply_text(text)?;
    Ok(config)
}

/// Runs a pipeline operation on the blocking pool.
async fn run_blocking<T, F>(work: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> pcrp_core::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(work).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(join_error) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: wire::ErrorBody { kind: "internal".into(), message: join_error.to_string() },
        }),
    }
}

async fn health() -> Json<wire::HealthResponse> {
    Json(wire::HealthResponse {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn train(
    Json(request): Json<wire::TrainRequest>,
) -> Result<Json<wire::TrainResponse>, ApiError> {
    let config = parse_config(&request.config)?;
    let report = run_blocking(move || {
        ops::op_train(
            &config,
            request.model_path.as_ref(),
            request.codebook_path.as_ref(),
        )
    })
    .await?;
    Ok(Json(wire::TrainResponse {
        training_clouds: report.training_clouds,
        hop1_dim: report.hop1_dim,
        feature_dim: report.feature_dim,
        hop1_energy: report.hop1_energy,
        hop2_energy: report.hop2_energy,
        codebook_k: report.codebook_k,
        codebook_inertia: report.codebook_inertia,
        codebook_iterations: report.codebook_iterations,
        model_path: report.model_path.display().to_string(),
        codebook_path: report.codebook_path.display().to_string(),
    }))
}

async fn index(
    Json(request): Json<wire::IndexRequest>,
) -> Result<Json<wire::IndexResponse>, ApiError> {
    let config = parse_config(&request.config)?;
    let report = run_blocking(move || {
        ops::op_index(
            &config,
            request.model_path.as_ref(),
            request.codebook_path.as_ref(),
            request.index_path.as_ref(),
        )
    })
    .await?;
    Ok(Json(wire::IndexResponse {
        records: report.records,
        categories: report.categories,
        degenerate: report.degenerate,
        index_path: report.index_path.display().to_string(),
    }))
}

fn pose_dto(record: &ops::PoseRecord) -> wire::Pose {
    wire::Pose {
        query_id: record.query_id.clone(),
        retrieved_id: record.retrieved_id.clone(),
        rotation: record.rotation,
        translation: record.translation,
        inlier_count: record.inlier_count,
        rms_residual: record.rms_residual,
        chamfer: record.chamfer,
        reliable: record.reliable,
    }
}

async fn query(
    Json(request): Json<wire::QueryRequest>,
) -> Result<Json<wire::QueryResponse>, ApiError> {
    let config = parse_config(&request.config)?;
    let report = run_blocking(move || {
        ops::op_query(
            &config,
            request.model_path.as_ref(),
            request.index_path.as_ref(),
            request.query_path.as_ref(),
            request.m,
            request.with_pose,
        )
    })
    .await?;
    Ok(Json(wire::QueryResponse {
        query_id: report.query_id,
        hits: report
            .hits
            .into_iter()
            .map(|hit| wire::QueryHit {
                id: hit.id,
                category: hit.category,
                distance: hit.distance,
            })
            .collect(),
        pose: report.pose.as_ref().map(pose_dto),
    }))
}

async fn register(
    Json(request): Json<wire::RegisterRequest>,
) -> Result<Json<wire::Pose>, ApiError> {
    let config = parse_config(&request.config)?;
    let record = run_blocking(move || {
        ops::op_register(
            &config,
            request.model_path.as_ref(),
            request.source_path.as_ref(),
            request.target_path.as_ref(),
            request.icp,
        )
    })
    .await?;
    Ok(Json(pose_dto(&record)))
}

async fn eval(
    Json(request): Json<wire::EvalRequest>,
) -> Result<Json<wire::EvalResponse>, ApiError> {
    let config = parse_config(&request.config)?;
    let report = run_blocking(move || {
        ops::op_eval(
            &config,
            request.model_path.as_ref(),
            request.index_path.as_ref(),
            request.output_dir.as_ref(),
            &ops::EvalOptions {
                m: request.m,
                arbitrary_pose: request.arbitrary_pose,
                limit: request.limit,
            },
        )
    })
    .await?;
    let stats = |s: &pcrp_core::metrics::ErrorStats| wire::ErrorStats {
        count: s.count,
        mean: s.mean,
        median: s.median,
        mse: s.mse,
        rmse: s.rmse,
        mae: s.mae,
    };
    Ok(Json(wire::EvalResponse {
        queries: report.queries,
        failures: report.failures,
        precision_mean: report.precision_mean,
        top1_chamfer_mean: report.top1_chamfer_mean,
        rotation: report.rotation.as_ref().map(stats),
        translation: report.translation.as_ref().map(stats),
        reliable_fraction: report.reliable_fraction,
        metrics_csv: report.metrics_csv.display().to_string(),
        summary_csv: report.summary_csv.display().to_string(),
        cdf_csv: report.cdf_csv.display().to_string(),
        poses_path: report.poses_path.display().to_string(),
    }))
}

async fn sample(
    Json(request): Json<wire::SampleRequest>,
) -> Result<Json<wire::SampleResponse>, ApiError> {
    let config = parse_config(&request.config)?;
    let report = run_blocking(move || {
        ops::op_sample(&config, request.input_path.as_ref(), request.output_path.as_ref())
    })
    .await?;
    Ok(Json(wire::SampleResponse {
        meshes: report.meshes,
        points_per_cloud: report.points_per_cloud,
        outputs: report.outputs.iter().map(|p| p.display().to_string()).collect(),
    }))
}
