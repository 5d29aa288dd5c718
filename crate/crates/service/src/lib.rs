//! HTTP service over annotation sessions.
//!
//! Each session holds one document, its graph and KB. Writes are serialized
//! per session and persisted to an append-only log; reads see the latest
//! committed snapshot. See [`routes`] for the endpoints.

pub mod error;
pub mod routes;
pub mod session;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::time::Instant;

use axum::extract::Request;
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::Router;
use tracing::info;

pub use error::ApiError;
pub use state::AppState;

/// One structured log line per request.
async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let start = Instant::now();
    let res = next.run(req).await;
    info!(
        method = %method,
        path = %path,
        status = res.status().as_u16(),
        latency_ms = start.elapsed().as_secs_f64() * 1000.0,
        "request"
    );
    res
}

pub fn router(state: AppState) -> Router {
    routes::routes()
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

/// Serves until ctrl-c, then lets in-flight requests finish.
pub async fn serve(state: AppState) -> std::io::Result<()> {
    let server = &state.config().server;
    let addr: SocketAddr = format!("{}:{}", server.host, server.port)
        .parse()
        .map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("bind address: {e}"),
            )
        })?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!(addr = %listener.local_addr()?, data_dir = %server.data_dir.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            info!("shutting down");
        })
        .await
}
