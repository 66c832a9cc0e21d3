//! Wire types and a thin HTTP client for the pcrp service.
//!
//! This crate defines the JSON request/response bodies of every endpoint
//! and a small async [`Client`]. It deliberately has no dependency on the
//! pipeline itself, so non-Rust consumers can treat these types as the API
//! contract.

use serde::{Deserialize, Serialize};

/// Every operation request carries the full run configuration in the flat
/// `key = value` text format, so one string reproduces one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRequest {
    pub config: String,
    pub model_path: String,
    pub codebook_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResponse {
    pub training_clouds: usize,
    pub hop1_dim: usize,
    pub feature_dim: usize,
    pub hop1_energy: f64,
    pub hop2_energy: f64,
    pub codebook_k: usize,
    pub codebook_inertia: f64,
    pub codebook_iterations: usize,
    pub model_path: String,
    pub codebook_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexRequest {
    pub config: String,
    pub model_path: String,
    pub codebook_path: String,
    pub index_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexResponse {
    pub records: usize,
    /// `(category, object count)` pairs in gallery order.
    pub categories: Vec<(String, usize)>,
    /// Objects whose VLAD descriptor collapsed to zero.
    pub degenerate: usize,
    pub index_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRequest {
    pub config: String,
    pub model_path: String,
    pub index_path: String,
    pub query_path: String,
    pub m: usize,
    pub with_pose: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryHit {
    pub id: String,
    pub category: String,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResponse {
    pub query_id: String,
    pub hits: Vec<QueryHit>,
    pub pose: Option<Pose>,
}

/// One registration result: rotation is row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pose {
    pub query_id: String,
    pub retrieved_id: String,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub inlier_count: usize,
    pub rms_residual: f64,
    pub chamfer: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub config: String,
    pub model_path: String,
    pub source_path: String,
    pub target_path: String,
    /// Run the point-to-point ICP baseline instead of the feature pipeline.
    pub icp: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRequest {
    pub config: String,
    pub model_path: String,
    pub index_path: String,
    pub output_dir: String,
    pub m: usize,
    pub arbitrary_pose: bool,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResponse {
    pub queries: usize,
    pub failures: usize,
    pub precision_mean: f64,
    pub top1_chamfer_mean: f64,
    pub rotation: Option<ErrorStats>,
    pub translation: Option<ErrorStats>,
    pub reliable_fraction: f64,
    pub metrics_csv: String,
    pub summary_csv: String,
    pub cdf_csv: String,
    pub poses_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRequest {
    pub config: String,
    pub input_path: String,
    pub output_path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleResponse {
    pub meshes: usize,
    pub points_per_cloud: usize,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

/// JSON body of every non-2xx response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Stable machine-readable slug, e.g. `invalid_config` or `io`.
    pub kind: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed")]
    Http(#[from] reqwest::Error),
    #[error("service error ({kind}): {message}")]
    Api { status: u16, kind: String, message: String },
}

impl ClientError {
    /// The service's error slug, when the failure came from the service.
    pub fn kind(&self) -> Option<&str> {
        match self {
            ClientError::Api { kind, .. } => Some(kind),
            ClientError::Http(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:7301`.
    pub fn new(base: impl Into<String>) -> Self {
        let mut base = base.into();
        while base.ends_with('/') {
            base.pop();
        }
        Self { base, http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn post<Q: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Q,
    ) -> Result<R> {
        let response = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        Self::decode(response).await
    }

    async fn decode<R: for<'de> Deserialize<'de>>(response: reqwest::Response) -> Result<R> {
        let status = response.status();
        if status.is_success() {
            return Ok(response.json().await?);
        }
        let body: ErrorBody = response.json().await.unwrap_or_else(|_| ErrorBody {
            kind: "unknown".into(),
            message: format!("service returned status {status}"),
        });
        Err(ClientError::Api { status: status.as_u16(), kind: body.kind, message: body.message })
    }

    pub async fn health(&self) -> Result<HealthResponse> {
        let response = self.http.get(format!("{}/api/health", self.base)).send().await?;
        Self::decode(response).await
    }

    pub async fn train(&self, request: &TrainRequest) -> Result<TrainResponse> {
        self.post("/api/train", request).await
    }

    pub async fn index(&self, request: &IndexRequest) -> Result<IndexResponse> {
        self.post("/api/index", request).await
    }

    pub async fn query(&self, request: &QueryRequest) -> Result<QueryResponse> {
        self.post("/api/query", request).await
    }

    pub async fn register(&self, request: &RegisterRequest) -> Result<Pose> {
        self.post("/api/register", request).await
    }

    pub async fn eval(&self, request: &EvalRequest) -> Result<EvalResponse> {
        self.post("/api/eval", request).await
    }

    pub async fn sample(&self, request: &SampleRequest) -> Result<SampleResponse> {
        self.post("/api/sample", request).await
    }
}
