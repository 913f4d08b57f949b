use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use perfcity::history::DEFAULT_HISTORY_CAPACITY;
use perfcity::ingest::{decode_record, WireRecord, DEFAULT_WINDOW_MS};
use perfcity::layout::{ColorScale, LayoutConfig};
use perfcity::service::{run_server, ServerConfig};
use tracing_subscriber::EnvFilter;

/// Live software-city performance server.
///
/// Profilers (or `perfcity-harness replay`) connect to the ingest address
/// and send line-delimited records; UI clients connect to
/// `ws://<serve>/ws`.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Ingest listener for profiler connections.
    #[arg(long, env = "PERFCITY_INGEST", default_value = "127.0.0.1:7070")]
    ingest: SocketAddr,
    /// Client WebSocket listener.
    #[arg(long, env = "PERFCITY_SERVE", default_value = "127.0.0.1:7071")]
    serve: SocketAddr,
    /// Aggregation window length in milliseconds.
    #[arg(long, env = "PERFCITY_WINDOW_MS", default_value_t = DEFAULT_WINDOW_MS)]
    window_ms: u64,
    /// Number of frames kept for the scatter history.
    #[arg(long, env = "PERFCITY_HISTORY", default_value_t = DEFAULT_HISTORY_CAPACITY)]
    history: usize,
    /// Longer ground edge of the served city, in world units.
    #[arg(long, env = "PERFCITY_SCALE", default_value_t = 1.0)]
    scale: f64,
    /// Calls per window shown as full red.
    #[arg(long, env = "PERFCITY_COLOR_REF", default_value_t = 1000)]
    color_ref: u64,
    /// Color ramp: linear or log.
    #[arg(long, env = "PERFCITY_COLOR_SCALE", default_value = "log")]
    color_scale: ColorScale,
    /// Model file to install before any profiler connects.
    #[arg(long, env = "PERFCITY_MODEL")]
    model: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();

    let cfg = ServerConfig {
        ingest_address: args.ingest,
        client_address: args.serve,
        window_ms: args.window_ms,
        history_capacity: args.history,
        layout: LayoutConfig { color_ref: args.color_ref, color_scale: args.color_scale, ..Default::default() },
        scale: args.scale,
    };
    let server = run_server(cfg).await?;

    if let Some(path) = &args.model {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let record = match decode_record(text.trim()).with_context(|| format!("parsing {}", path.display()))? {
            WireRecord::Model(m) => m,
            _ => anyhow::bail!("{} does not hold a model record", path.display()),
        };
        let revision = server.load_model(record).await??;
        tracing::info!(revision, "model file loaded");
    }

    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    if let Some(frame) = server.shutdown().await {
        tracing::info!(window = frame.window_index, "flushed final frame");
    }
    Ok(())
}
