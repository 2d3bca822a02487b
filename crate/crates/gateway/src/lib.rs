//! Network service around live mission sessions: an HTTP API to list
//! missions, create sessions, submit operator prompts and fetch logs, plus a
//! WebSocket per session streaming telemetry.
//!
//! The service adds no flight behavior of its own. Sessions drive the same
//! runners as the command line, so a session fed the same fixture and the
//! same first prompt produces the same mission log.

pub mod error;
pub mod http;
pub mod session;
pub mod telemetry;

use std::net::SocketAddr;

pub use error::GatewayError;
pub use http::{router, MissionSummary};
pub use session::{CreateSession, GatewayConfig, ProviderKind, SessionHandle, SessionManager, SessionStatus};
pub use telemetry::{SessionState, Snapshot, TelemetryFrame, TelemetryHub, TelemetryMessage, Vitals};

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, config: GatewayConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(SessionManager::new(config))).await
}
