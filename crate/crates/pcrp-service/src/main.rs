//! Standalone service binary: `pcrp-service [--addr HOST:PORT] [--threads N]`.

use anyhow::Context;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let mut addr = "127.0.0.1:7301".to_string();
    let mut threads = 0usize;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--addr" => addr = args.next().context("--addr needs a value")?,
            "--threads" => {
                threads = args
                    .next()
                    .context("--threads needs a value")?
                    .parse()
                    .context("--threads must be a number")?;
            }
            other => anyhow::bail!("unknown argument `{other}` (expected --addr or --threads)"),
        }
    }

    pcrp_service::core::ops::configure_threads(threads);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("cannot bind {addr}"))?;
    tracing::info!(addr = %listener.local_addr()?, "pcrp service listening");
    pcrp_service::serve(listener).await?;
    Ok(())
}
