//! Scripted-provider fixtures derived from direct-control runs.
//!
//! Each burst of a direct run becomes one assistant turn carrying the same
//! tool calls, followed by a closing turn with the completion marker. Under
//! such a script the model-in-the-loop run issues exactly the direct run's
//! stream calls.

use serde_json::json;

use super::log::MissionLog;
use crate::llm::{Responder, ScriptFixture, ScriptMatch, ScriptedResponse, ScriptedToolCall};

pub fn script_from_log(log: &MissionLog, marker: &str) -> ScriptFixture {
    let mut turns: Vec<Vec<ScriptedToolCall>> = Vec::new();
    let mut current = None;
    for r in &log.records {
        if current != Some(r.burst) {
            turns.push(Vec::new());
            current = Some(r.burst);
        }
        turns
            .last_mut()
            .expect("pushed above")
            .push(ScriptedToolCall { name: r.name.as_str().into(), arguments: r.args.clone() });
    }
    ScriptFixture::from_turns(
        &format!("Replays the direct-control stream calls of {}.", log.mission.id),
        turns,
        &format!("The UAV is at the goal. {marker}"),
    )
}

/// Prepends a turn whose `startMission` call lacks its required argument;
/// the remaining responders move one turn later.
pub fn with_malformed_first_turn(fixture: &ScriptFixture) -> ScriptFixture {
    let mut responders = vec![Responder {
        matcher: ScriptMatch { turn: Some(0), last_contains: None },
        response: ScriptedResponse {
            content: String::new(),
            tool_calls: vec![ScriptedToolCall { name: "startMission".into(), arguments: json!({}) }],
            usage: None,
        },
    }];
    for r in &fixture.responders {
        let mut r = r.clone();
        r.matcher.turn = r.matcher.turn.map(|t| t + 1);
        responders.push(r);
    }
    ScriptFixture {
        description: format!("{} The first turn is malformed and must be retried.", fixture.description),
        responders,
    }
}
