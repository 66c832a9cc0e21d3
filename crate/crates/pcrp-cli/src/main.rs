//! `pcrp`: command-line client for the pipeline service.
//!
//! Every command except `serve` talks HTTP: to `--server URL` when given,
//! otherwise to an embedded service on an ephemeral local port, so the same
//! code path covers both local and remote use. Diagnostics go to stderr;
//! results go to stdout or to files.
//!
//! Exit codes: 0 on success, 2 for configuration and input-file problems
//! (bad config, missing dataset, malformed files, usage errors), 1 for
//! everything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcrp_client::{
    Client, ClientError, EvalRequest, IndexRequest, Pose, QueryRequest, RegisterRequest,
    SampleRequest, TrainRequest,
};
use pcrp_service::core::ops::{configure_threads, PoseRecord};
use pcrp_service::core::PipelineConfig;

#[derive(Parser)]
#[command(name = "pcrp", version, about = "Point-cloud retrieval and pose estimation")]
struct Cli {
    /// Service URL (e.g. http://127.0.0.1:7301); runs an embedded service
    /// when omitted.
    #[arg(long, global = true)]
    server: Option<String>,
    /// Configuration file (flat `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per CPU).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for artifacts and reports.
    #[arg(long, global = true, default_value = ".")]
    output: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7301")]
        addr: String,
    },
    /// Fit the feature model and VLAD codebook on the training split.
    Train {
        /// Model output path (default: <output>/model.pcrp).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Codebook output path (default: <output>/codebook.pcrc).
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Build the gallery index over the gallery split.
    Index {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Index output path (default: <output>/gallery.pcrg).
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Retrieve the closest gallery objects for one cloud and estimate its
    /// pose against the best match.
    Query {
        /// Query cloud (.xyz, or .off to be sampled on the fly).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Number of matches to report.
        #[arg(short, default_value_t = 10)]
        m: usize,
        /// Skip pose estimation and report retrieval only.
        #[arg(long)]
        no_pose: bool,
    },
    /// Register a source cloud onto a target cloud directly.
    Register {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Use the point-to-point ICP baseline instead of the pipeline.
        #[arg(long)]
        icp: bool,
    },
    /// Evaluate retrieval and registration over the query split, writing
    /// metrics.csv, summary.csv, rotation_cdf.csv, and poses.txt.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Precision@M cut-off and retrieval depth.
        #[arg(short, default_value_t = 10)]
        m: usize,
        /// Apply a random rigid motion to each query and score against it.
        #[arg(long)]
        arbitrary_pose: bool,
        /// Evaluate only the first N queries.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Sample OFF meshes into normalized .xyz clouds (file or directory).
    Sample {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("pcrp: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("pcrp: {error:#}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}

/// Config-shaped failures exit with 2, everything else with 1.
fn exit_code_for(error: &anyhow::Error) -> u8 {
    if let Some(client_error) = error.downcast_ref::<ClientError>() {
        if matches!(client_error.kind(), Some("invalid_config" | "io" | "malformed_file")) {
            return 2;
        }
    }
    if error.downcast_ref::<pcrp_service::core::Error>().is_some() {
        return 2;
    }
    1
}

async fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads(cli.threads.unwrap_or(0));

    if let Command::Serve { addr } = &cli.command {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("pcrp service listening on {}", listener.local_addr()?);
        pcrp_service::serve(listener).await?;
        return Ok(());
    }

    let config = load_config(&cli)?;
    let client = connect(&cli).await?;

    match &cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::Train { model, codebook } => {
            let response = client
                .train(&TrainRequest {
                    config,
                    model_path: artifact(&cli, model, "model.pcrp"),
                    codebook_path: artifact(&cli, codebook, "codebook.pcrc"),
                })
                .await?;
            println!("training clouds: {}", response.training_clouds);
            println!(
                "hop-1 dims: {} (retained energy {:.6})",
                response.hop1_dim, response.hop1_energy
            );
            println!(
                "feature dims: {} (retained energy {:.6})",
                response.feature_dim, response.hop2_energy
            );
            println!(
                "codebook: k={} inertia={:.6} iterations={}",
                response.codebook_k, response.codebook_inertia, response.codebook_iterations
            );
            println!("model: {}", response.model_path);
            println!("codebook: {}", response.codebook_path);
        }
        Command::Index { model, codebook, index } => {
            let response = client
                .index(&IndexRequest {
                    config,
                    model_path: artifact(&cli, model, "model.pcrp"),
                    codebook_path: artifact(&cli, codebook, "codebook.pcrc"),
                    index_path: artifact(&cli, index, "gallery.pcrg"),
                })
                .await?;
            println!("indexed objects: {}", response.records);
            for (category, count) in &response.categories {
                println!("  {category}: {count}");
            }
            if response.degenerate > 0 {
                eprintln!("warning: {} degenerate descriptors", response.degenerate);
            }
            println!("index: {}", response.index_path);
        }
        Command::Query { input, model, index, m, no_pose } => {
            let response = client
                .query(&QueryRequest {
                    config,
                    model_path: artifact(&cli, model, "model.pcrp"),
                    index_path: artifact(&cli, index, "gallery.pcrg"),
                    query_path: path_string(input),
                    m: *m,
                    with_pose: !no_pose,
                })
                .await?;
            println!("query: {}", response.query_id);
            for (rank, hit) in response.hits.iter().enumerate() {
                println!("{:2}. {} ({}) distance {}", rank + 1, hit.id, hit.category, hit.distance);
            }
            if let Some(pose) = &response.pose {
                println!();
                print!("{}", pose_text(pose));
            }
        }
        Command::Register { source, target, model, icp } => {
            let pose = client
                .register(&RegisterRequest {
                    config,
                    model_path: artifact(&cli, model, "model.pcrp"),
                    source_path: path_string(source),
                    target_path: path_string(target),
                    icp: *icp,
                })
                .await?;
            print!("{}", pose_text(&pose));
        }
        Command::Eval { model, index, m, arbitrary_pose, limit } => {
            let response = client
                .eval(&EvalRequest {
                    config,
                    model_path: artifact(&cli, model, "model.pcrp"),
                    index_path: artifact(&cli, index, "gallery.pcrg"),
                    output_dir: path_string(&cli.output),
                    m: *m,
                    arbitrary_pose: *arbitrary_pose,
                    limit: *limit,
                })
                .await?;
            println!("queries: {} ({} failed)", response.queries, response.failures);
            println!("precision@{m}: {:.4}", response.precision_mean);
            println!("top-1 chamfer mean: {:.6}", response.top1_chamfer_mean);
            if let Some(rotation) = &response.rotation {
                println!(
                    "rotation error (deg): mean {:.4} median {:.4} mse {:.4} rmse {:.4} mae {:.4}",
                    rotation.mean, rotation.median, rotation.mse, rotation.rmse, rotation.mae
                );
            }
            if let Some(translation) = &response.translation {
                println!(
                    "translation error: mse {:.6} rmse {:.6} mae {:.6}",
                    translation.mse, translation.rmse, translation.mae
                );
            }
            println!("reliable fraction: {:.4}", response.reliable_fraction);
            println!("metrics: {}", response.metrics_csv);
            println!("summary: {}", response.summary_csv);
            println!("rotation cdf: {}", response.cdf_csv);
            println!("poses: {}", response.poses_path);
        }
        Command::Sample { input } => {
            let response = client
                .sample(&SampleRequest {
                    config,
                    input_path: path_string(input),
                    output_path: path_string(&cli.output),
                })
                .await?;
            println!(
                "sampled {} meshes x {} points -> {}",
                response.meshes,
                response.points_per_cloud,
                cli.output.display()
            );
        }
    }
    Ok(())
}

/// Loads the config file (or defaults) and folds in the shared overrides,
/// returning the flat text representation sent with every request.
fn load_config(cli: &Cli) -> anyhow::Result<String> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    Ok(config.to_text())
}

async fn connect(cli: &Cli) -> anyhow::Result<Client> {
    match &cli.server {
        Some(url) => Ok(Client::new(url.clone())),
        None => {
            let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
            let addr = listener.local_addr()?;
            tokio::spawn(pcrp_service::serve(listener));
            Ok(Client::new(format!("http://{addr}")))
        }
    }
}

fn artifact(cli: &Cli, explicit: &Option<PathBuf>, default_name: &str) -> String {
    match explicit {
        Some(path) => path_string(path),
        None => path_string(&cli.output.join(default_name)),
    }
}

fn path_string(path: &Path) -> String {
    path.display().to_string()
}

/// Renders a pose in the registration record format.
fn pose_text(pose: &Pose) -> String {
    PoseRecord {
        query_id: pose.query_id.clone(),
        retrieved_id: pose.retrieved_id.clone(),
        rotation: pose.rotation,
        translation: pose.translation,
        inlier_count: pose.inlier_count,
        rms_residual: pose.rms_residual,
        chamfer: pose.chamfer,
        reliable: pose.reliable,
    }
    .to_text()
}
