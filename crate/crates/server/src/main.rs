use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::Parser;

use breakout_core::{validate_config, Durability, Store, Timestamp};
use breakout_server::{serve, AppState, ServerConfig};

/// Meeting analytics server.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    #[arg(long, env = "BREAKOUT_LISTEN_ADDR", default_value = "127.0.0.1:8080")]
    listen: String,
    #[arg(long, env = "BREAKOUT_DATA_DIR", default_value = "./data")]
    data_dir: PathBuf,
    /// Default tick period for new sessions.
    #[arg(long)]
    tick_ms: Option<u64>,
    /// Default statistics window for new sessions.
    #[arg(long)]
    window_ms: Option<u64>,
    /// Flush writes without fsync.
    #[arg(long)]
    no_fsync: bool,
    /// Close a session, archive its files and exit.
    #[arg(long, value_name = "ID")]
    close_session: Option<String>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();

    let token = std::env::var("BREAKOUT_TOKEN").context("BREAKOUT_TOKEN must be set")?;
    anyhow::ensure!(!token.is_empty(), "BREAKOUT_TOKEN is empty");
    let mut config = ServerConfig::new(token, &args.data_dir);
    if args.no_fsync {
        config.durability = Durability::Flush;
    }
    if let Some(t) = args.tick_ms {
        config.analytics.tick_ms = t;
    }
    if let Some(w) = args.window_ms {
        config.analytics.window_ms = w;
    }
    if let Err(errs) = validate_config(&config.segmenter, &config.analytics) {
        let msgs: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        anyhow::bail!("invalid configuration: {}", msgs.join("; "));
    }

    if let Some(id) = args.close_session {
        return close_and_archive(config, &id);
    }

    let tick = Duration::from_millis(config.analytics.tick_ms.min(1000));
    let running = serve(config, &args.listen, Some(tick)).await?;
    tracing::info!("listening on {}", running.addr);
    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    Ok(())
}

fn close_and_archive(config: ServerConfig, id: &str) -> anyhow::Result<()> {
    let state = AppState::open(config)?;
    let handle = state.session(id).map_err(|_| anyhow::anyhow!("unknown session {id}"))?;
    if !handle.with_session(|s| s.is_closed()) {
        let now = handle.with_session(|s| s.clock()).max(Timestamp::now());
        handle.close(state.store(), now)?;
    }
    let store: &Store = state.store();
    store.archive(handle.id())?;
    println!("archived session {id}");
    Ok(())
}
