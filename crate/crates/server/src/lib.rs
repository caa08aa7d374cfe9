//! Live meeting analytics over HTTP and websockets.

pub mod envelope;
pub mod error;
pub mod http;
pub mod state;
pub mod ws;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub use envelope::{Envelope, EnvelopeKind};
pub use error::ApiError;
pub use http::router;
pub use state::{run_scheduler, AppState, ServerConfig, SessionHandle, TickSummary};

/// A server bound to a local port, with its scheduler.
pub struct Running {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    server: JoinHandle<()>,
    scheduler: Option<JoinHandle<()>>,
}

impl Running {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops serving without any graceful shutdown, the way a crash would.
    pub fn abort(self) {
        self.server.abort();
        if let Some(s) = &self.scheduler {
            s.abort();
        }
    }
}

/// Binds `listen`, restores the data directory and starts serving. A `None`
/// tick period leaves ticking to the caller.
pub async fn serve(config: ServerConfig, listen: &str, tick: Option<Duration>) -> anyhow::Result<Running> {
    let data = config.data_dir.clone();
    let state = tokio::task::spawn_blocking(move || AppState::open(config))
        .await?
        .map_err(|e| anyhow::anyhow!("opening {}: {e}", data.display()))?;
    let listener = TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let app = router(state.clone());
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server stopped: {e}");
        }
    });
    let scheduler = tick.map(|period| tokio::spawn(run_scheduler(state.clone(), period)));
    Ok(Running { addr, state, server, scheduler })
}
