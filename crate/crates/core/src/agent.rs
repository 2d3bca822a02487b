//! First-order kinematic UAV. Velocity commands integrate directly into
//! position; attitude is derived from the commanded velocity for display.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Vec3};

/// Slack applied to speed limit checks so that velocities produced by
/// dividing a distance by a duration are not rejected for rounding.
pub const LIMIT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("command exceeds limits: {0}")]
    LimitExceeded(String),
    #[error("duration and time step must be positive and finite")]
    InvalidDuration,
    #[error("waypoint list is empty")]
    NoWaypoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    /// Heading in `(-pi, pi]`.
    pub yaw: f64,
    pub roll: f64,
    pub pitch: f64,
}

impl Pose {
    pub fn at(position: Vec3) -> Self {
        Self { position, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub duration: f64,
}

impl VelocityCommand {
    pub fn new(velocity: Vec3, duration: f64) -> Self {
        Self { vx: velocity.x, vy: velocity.y, vz: velocity.z, duration }
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.vx, self.vy, self.vz)
    }

    pub fn horizontal_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_hover(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.vz == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentLimits {
    pub max_h_speed: f64,
    /// Ascent (and descent) speed limit.
    pub max_v_speed: f64,
    pub attitude_limit: f64,
}

impl Default for AgentLimits {
    fn default() -> Self {
        Self {
            max_h_speed: 2.0,
            max_v_speed: 1.0,
            attitude_limit: std::f64::consts::FRAC_PI_6,
        }
    }
}

impl AgentLimits {
    pub fn check(&self, cmd: &VelocityCommand) -> Result<(), AgentError> {
        if !(cmd.duration.is_finite() && cmd.duration > 0.0) {
            return Err(AgentError::InvalidDuration);
        }
        if ![cmd.vx, cmd.vy, cmd.vz].iter().all(|v| v.is_finite()) {
            return Err(AgentError::LimitExceeded("non-finite velocity".into()));
        }
        let h = cmd.horizontal_speed();
        if h > self.max_h_speed + LIMIT_EPS {
            return Err(AgentError::LimitExceeded(format!(
                "horizontal speed {h:.3} m/s above {} m/s",
                self.max_h_speed
            )));
        }
        if cmd.vz.abs() > self.max_v_speed + LIMIT_EPS {
            return Err(AgentError::LimitExceeded(format!(
                "vertical speed {:.3} m/s above {} m/s",
                cmd.vz.abs(),
                self.max_v_speed
            )));
        }
        Ok(())
    }

    /// Time needed to cover `delta` with both speed limits respected.
    pub fn min_travel_time(&self, delta: Vec3) -> f64 {
        (delta.horizontal_norm() / self.max_h_speed).max(delta.z.abs() / self.max_v_speed)
    }
}

/// Advances `pose` under `cmd` for `min(dt, cmd.duration)` seconds.
///
/// Yaw follows the horizontal velocity; pitch and roll are the commanded x and
/// y velocity as a fraction of the horizontal limit, scaled to the attitude
/// limit (nose down for forward flight). A hover command leaves the pose as is.
pub fn step(
    pose: Pose,
    cmd: &VelocityCommand,
    dt: f64,
    limits: &AgentLimits,
) -> Result<Pose, AgentError> {
    limits.check(cmd)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(AgentError::InvalidDuration);
    }
    if cmd.is_hover() {
        return Ok(pose);
    }
    let t = dt.min(cmd.duration);
    let position = pose.position + cmd.velocity() * t;
    let yaw = if cmd.horizontal_speed() > 0.0 {
        wrap_angle(cmd.vy.atan2(cmd.vx))
    } else {
        pose.yaw
    };
    let lim = limits.attitude_limit;
    let pitch = (-cmd.vx / limits.max_h_speed * lim).clamp(-lim, lim);
    let roll = (cmd.vy / limits.max_h_speed * lim).clamp(-lim, lim);
    Ok(Pose { position, yaw, roll, pitch })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
}

struct Leg {
    start: Pose,
    t0: f64,
    t1: f64,
    cmd: VelocityCommand,
}

/// Flies a straight-line polyline through `waypoints` at the fastest speed
/// the limits allow, sampling every `dt`. The first sample is the initial
/// pose and the last is exactly the final waypoint.
pub fn follow_waypoints(
    pose: Pose,
    waypoints: &[Vec3],
    limits: &AgentLimits,
    dt: f64,
) -> Result<Vec<TrajectorySample>, AgentError> {
    if waypoints.is_empty() {
        return Err(AgentError::NoWaypoints);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(AgentError::InvalidDuration);
    }

    let mut legs = Vec::new();
    let mut current = pose;
    let mut clock = 0.0;
    for &wp in waypoints {
        let delta = wp - current.position;
        let duration = limits.min_travel_time(delta);
        if duration <= 0.0 {
            continue;
        }
        let cmd = VelocityCommand::new(delta * (1.0 / duration), duration);
        let mut end = step(current, &cmd, duration, limits)?;
        end.position = wp;
        legs.push(Leg { start: current, t0: clock, t1: clock + duration, cmd });
        clock += duration;
        current = end;
    }

    let total = clock;
    let mut samples = vec![TrajectorySample { t: 0.0, pose }];
    let mut k = 1u64;
    let mut leg_idx = 0;
    loop {
        let t = k as f64 * dt;
        if t >= total {
            break;
        }
        while legs[leg_idx].t1 <= t {
            leg_idx += 1;
        }
        let leg = &legs[leg_idx];
        let p = if t > leg.t0 { step(leg.start, &leg.cmd, t - leg.t0, limits)? } else { leg.start };
        samples.push(TrajectorySample { t, pose: p });
        k += 1;
    }
    if total > 0.0 {
        samples.push(TrajectorySample { t: total, pose: current });
    }
    Ok(samples)
}
