//! Metrics computed from a log alone.

use serde::{Deserialize, Serialize};

use super::log::{LogError, MissionLog};
use crate::geometry::{point_segment_distance, Vec3};
use crate::world::{collision_check, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub reached: bool,
    /// Length of the sampled trajectory, meters.
    pub path_length: f64,
    /// Sampled trajectory segments touching any obstacle solid.
    pub net_collisions: usize,
    /// Sampled segments entering some obstacle's clearance boundary.
    pub clearance_violations: usize,
    /// Closest approach of the trajectory to any sphere centre, meters.
    pub min_sphere_distance: Option<f64>,
    pub calls_used: u32,
    pub stream_calls: usize,
    pub sim_duration: f64,
    pub max_altitude: f64,
    /// Largest horizontal distance from the start-goal line, meters.
    pub max_ground_track_deviation: f64,
    pub final_position: Vec3,
    pub goal_distance: f64,
}

/// Re-checks the sampled trajectory against the logged world.
pub fn evaluate(log: &MissionLog) -> Result<Metrics, LogError> {
    let world = log.world()?;
    let spec = &log.mission;
    let samples = &log.trajectory;
    for w in samples.windows(2) {
        if w[1].t < w[0].t {
            return Err(LogError::MalformedLog(format!("sample time {} precedes {}", w[1].t, w[0].t)));
        }
    }
    for w in log.records.windows(2) {
        if w[1].sim_time < w[0].sim_time || w[1].call_id <= w[0].call_id {
            return Err(LogError::MalformedLog(format!("records out of order at call {}", w[1].call_id)));
        }
    }

    let mut path_length = 0.0;
    let mut net_collisions = 0;
    let mut clearance_violations = 0;
    let mut min_sphere: Option<f64> = None;
    for w in samples.windows(2) {
        let (a, b) = (w[0].pose.position, w[1].pose.position);
        path_length += a.distance(b);
        let report = collision_check(&world.obstacles, a, b);
        if !report.collisions.is_empty() {
            net_collisions += 1;
        }
        if !report.clearance_violations.is_empty() {
            clearance_violations += 1;
        }
        for o in &world.obstacles {
            if let Shape::Sphere { center, .. } = o.shape {
                let d = point_segment_distance(center, a, b);
                min_sphere = Some(min_sphere.map_or(d, |m: f64| m.min(d)));
            }
        }
    }

    let final_position = samples.last().map_or(spec.start, |s| s.pose.position);
    let goal_distance = final_position.distance(spec.goal);
    let max_altitude = samples.iter().map(|s| s.pose.position.z).fold(f64::NEG_INFINITY, f64::max);
    let ground = (spec.start.with_z(0.0), spec.goal.with_z(0.0));
    let max_ground_track_deviation = samples
        .iter()
        .map(|s| point_segment_distance(s.pose.position.with_z(0.0), ground.0, ground.1))
        .fold(0.0, f64::max);
    let sim_duration = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    Ok(Metrics {
        reached: goal_distance <= spec.goal_tolerance,
        path_length,
        net_collisions,
        clearance_violations,
        min_sphere_distance: min_sphere,
        calls_used: log.calls_used,
        stream_calls: log.records.len(),
        sim_duration,
        max_altitude: if samples.is_empty() { spec.start.z } else { max_altitude },
        max_ground_track_deviation,
        final_position,
        goal_distance,
    })
}
