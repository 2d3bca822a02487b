//! System prompt template.

use std::fmt::Write;

use crate::mission::LoadedMission;
use crate::streams::StreamName;

/// Text the model replies with, without tool calls, once it is done.
pub const DEFAULT_COMPLETION_MARKER: &str = "MISSION COMPLETE";

/// Builds the system prompt: role, world summary, tool inventory, mission
/// endpoints and then each constraint verbatim. Deterministic.
pub fn build_system_prompt(mission: &LoadedMission, constraints: &[String]) -> String {
    build_system_prompt_with(mission, constraints, DEFAULT_COMPLETION_MARKER)
}

pub fn build_system_prompt_with(mission: &LoadedMission, constraints: &[String], marker: &str) -> String {
    let spec = &mission.spec;
    let w = &mission.world;
    let e = &w.extent;
    let mut out = String::new();
    out.push_str(
        "You are the flight controller of a simulated quadcopter UAV. You act only by calling \
         the tools below; they are executed in the order you list them and their results are \
         returned to you. Coordinates are meters, x east, y north, z up.\n\n",
    );
    let _ = writeln!(
        out,
        "World: x from {} to {}, y from {} to {}, altitude from 0 to {}; occupancy grid of {} m cells; {} obstacle(s).\n",
        e.x_min,
        e.x_max,
        e.y_min,
        e.y_max,
        e.z_ceiling,
        w.resolution,
        w.obstacles.len()
    );
    out.push_str("Tools:\n");
    for name in StreamName::ALL {
        let schema = name.schema();
        let _ = writeln!(out, "- {}: {}", schema.name, schema.description);
    }
    let _ = writeln!(
        out,
        "\nMission {}: fly from {} to {}. The goal counts as reached within {} m.",
        spec.id, spec.start, spec.goal, spec.goal_tolerance
    );
    let _ = writeln!(
        out,
        "When the UAV is at the goal, reply with the text \"{marker}\" and no tool calls."
    );
    if !constraints.is_empty() {
        out.push_str("\nConstraints:\n");
        for c in constraints {
            let _ = writeln!(out, "- {c}");
        }
    }
    out
}
