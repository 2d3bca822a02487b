//! HTTP and WebSocket routes, all under `/v1`.
//!
//! | Method | Path | Body / reply |
//! |---|---|---|
//! | GET | `/v1/missions` | list of [`MissionSummary`] |
//! | GET | `/v1/missions/{id}` | mission with its world inline |
//! | GET | `/v1/schemas` | tool schemas of the eight streams |
//! | GET | `/v1/sessions` | list of session handles |
//! | POST | `/v1/sessions` | [`CreateSession`] → handle (201) |
//! | GET | `/v1/sessions/{id}` | [`SessionStatus`] |
//! | POST | `/v1/sessions/{id}/prompt` | `{"text": ...}` → handle (202) |
//! | POST | `/v1/sessions/{id}/run` | starts a direct-mode session (202) |
//! | GET | `/v1/sessions/{id}/snapshot` | telemetry snapshot |
//! | GET | `/v1/sessions/{id}/log` | mission log as NDJSON |
//! | GET | `/v1/sessions/{id}/telemetry` | WebSocket of telemetry messages |

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use flightlink_core::geometry::Vec3;
use flightlink_core::mission::{LoadedMission, StrategyConstraint};
use flightlink_core::streams::all_schemas;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::GatewayError;
use crate::session::{CreateSession, SessionManager};

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let code = StatusCode::from_u16(self.status_code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        (code, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub id: String,
    pub description: String,
    pub start: Vec3,
    pub goal: Vec3,
    pub strategy: StrategyConstraint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_bound: Option<f64>,
    pub call_limit: u32,
    pub obstacle_count: usize,
}

impl MissionSummary {
    pub fn of(m: &LoadedMission) -> Self {
        let s = &m.spec;
        Self {
            id: s.id.clone(),
            description: s.description.clone(),
            start: s.start,
            goal: s.goal,
            strategy: s.strategy,
            height_bound: s.height_bound,
            call_limit: s.call_limit,
            obstacle_count: m.world.obstacles.len(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptBody {
    text: String,
}

pub fn router(manager: SessionManager) -> Router {
    Router::new()
        .route("/v1/missions", get(list_missions))
        .route("/v1/missions/{id}", get(get_mission))
        .route("/v1/schemas", get(schemas))
        .route("/v1/sessions", get(list_sessions).post(create_session))
        .route("/v1/sessions/{id}", get(status))
        .route("/v1/sessions/{id}/prompt", post(prompt))
        .route("/v1/sessions/{id}/run", post(run))
        .route("/v1/sessions/{id}/snapshot", get(snapshot))
        .route("/v1/sessions/{id}/log", get(log))
        .route("/v1/sessions/{id}/telemetry", get(telemetry))
        .with_state(manager)
}

async fn list_missions(State(m): State<SessionManager>) -> impl IntoResponse {
    Json(m.missions().iter().map(MissionSummary::of).collect::<Vec<_>>())
}

async fn get_mission(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<Response, GatewayError> {
    let mission = m.mission(&id)?;
    let inline = LoadedMission::inline(mission.spec.clone(), mission.world.clone())
        .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
    Ok(Json(inline.spec).into_response())
}

async fn schemas() -> impl IntoResponse {
    Json(all_schemas())
}

async fn list_sessions(State(m): State<SessionManager>) -> impl IntoResponse {
    Json(m.sessions())
}

/// Parses the body ourselves so malformed JSON gets the same error shape.
fn parse<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, GatewayError> {
    serde_json::from_str(body).map_err(|e| GatewayError::InvalidRequest(e.to_string()))
}

async fn create_session(State(m): State<SessionManager>, body: String) -> Result<Response, GatewayError> {
    let req: CreateSession = parse(&body)?;
    let handle = m.create_session(req)?;
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

async fn status(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<Response, GatewayError> {
    Ok(Json(m.status(&id)?).into_response())
}

async fn prompt(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    body: String,
) -> Result<Response, GatewayError> {
    let req: PromptBody = parse(&body)?;
    let handle = m.submit_prompt(&id, &req.text)?;
    Ok((StatusCode::ACCEPTED, Json(handle)).into_response())
}

async fn run(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<Response, GatewayError> {
    let handle = m.start_direct(&id)?;
    Ok((StatusCode::ACCEPTED, Json(handle)).into_response())
}

async fn snapshot(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<Response, GatewayError> {
    Ok(Json(m.snapshot(&id)?).into_response())
}

async fn log(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<Response, GatewayError> {
    let log = m.log(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], log.to_ndjson()).into_response())
}

async fn telemetry(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, GatewayError> {
    // Subscribe before upgrading so a missing session is a plain 404.
    let rx = m.subscribe(&id)?;
    Ok(ws.on_upgrade(move |socket| forward(socket, rx)))
}

async fn forward(
    mut socket: WebSocket,
    mut rx: tokio::sync::mpsc::UnboundedReceiver<crate::telemetry::TelemetryMessage>,
) {
    while let Some(msg) = rx.recv().await {
        let Ok(text) = serde_json::to_string(&msg) else { continue };
        if socket.send(Message::Text(text.into())).await.is_err() {
            return;
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}
