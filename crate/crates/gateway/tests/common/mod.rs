#![allow(dead_code)]

use std::path::PathBuf;

use flightlink_core::llm::{Responder, ScriptFixture, ScriptMatch, ScriptedResponse};
use flightlink_core::mission::LoadedMission;
use flightlink_gateway::{GatewayConfig, SessionManager, TelemetryMessage};
use tokio::sync::mpsc::UnboundedReceiver;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn mission(id: &str) -> LoadedMission {
    LoadedMission::load(&fixtures().join(format!("missions/{id}.json"))).unwrap()
}

pub fn config() -> GatewayConfig {
    let missions = ["mission-1", "mission-2", "mission-3", "mission-complex"].map(mission).to_vec();
    let mut c = GatewayConfig::new(missions);
    c.scripts_dir = Some(fixtures().join("scripts"));
    c
}

pub fn manager() -> SessionManager {
    SessionManager::new(config())
}

/// Collects messages until the end-of-stream marker.
pub fn drain(mut rx: UnboundedReceiver<TelemetryMessage>) -> Vec<TelemetryMessage> {
    let mut out = Vec::new();
    while let Some(m) = rx.blocking_recv() {
        let done = matches!(m, TelemetryMessage::Finished { .. });
        out.push(m);
        if done {
            break;
        }
    }
    out
}

/// Messages up to and including the next frame in `state`.
pub fn until_state(rx: &mut UnboundedReceiver<TelemetryMessage>, state: &str) -> Vec<TelemetryMessage> {
    let mut out = Vec::new();
    while let Some(m) = rx.blocking_recv() {
        let hit = match &m {
            TelemetryMessage::Frame(f) => f.vitals.state.as_str() == state,
            TelemetryMessage::Finished { .. } => true,
            TelemetryMessage::Snapshot(_) => false,
        };
        out.push(m);
        if hit {
            break;
        }
    }
    out
}

/// The shipped `base` script, one turn later, behind a plain-text question.
pub fn script_with_question(base: &str, question: &str) -> ScriptFixture {
    let mut f = ScriptFixture::load(&fixtures().join(format!("scripts/{base}.json"))).unwrap();
    for r in &mut f.responders {
        r.matcher.turn = r.matcher.turn.map(|t| t + 1);
    }
    f.responders.insert(
        0,
        Responder {
            matcher: ScriptMatch { turn: Some(0), last_contains: None },
            response: ScriptedResponse { content: question.into(), ..ScriptedResponse::default() },
        },
    );
    f
}
