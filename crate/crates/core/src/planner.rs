//! Deterministic avoidance planning for the three single-obstacle maneuvers,
//! plus the straight leg that connects them.
//!
//! Every plan carries the waypoint polyline and the `executeAgentManeuver`
//! sub-calls that fly it. Each leg is flown at one constant velocity for a
//! duration rounded up to a multiple of the half-second quantum, so the calls
//! reproduce the polyline exactly and never exceed the requested speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentLimits;
use crate::geometry::{point_segment_distance, Vec3};
use crate::world::{Obstacle, Shape, WorldExtent};

/// Admissible `executeAgentManeuver` durations, in seconds.
pub const QUANTA: [f64; 2] = [0.5, 3.0];
const SHORT_QUANTUM: f64 = 0.5;
const LONG_QUANTUM: f64 = 3.0;
const TIE_EPS: f64 = 1e-9;

pub fn is_quantum(q: f64) -> bool {
    QUANTA.contains(&q)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("point {0} is outside the world extent")]
    OutOfBounds(Vec3),
    #[error("strategy unnecessary: {0}")]
    StrategyUnnecessary(String),
    #[error("strategy infeasible: {0}")]
    StrategyInfeasible(String),
    #[error("height bound {bound} m plus margin is below the start altitude {start_z} m")]
    BoundNotAboveStart { bound: f64, start_z: f64 },
    #[error("cruise altitude {cruise} m exceeds the ceiling {ceiling} m")]
    CeilingExceeded { cruise: f64, ceiling: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Avoidance strategy named in an `avoidObstacle` call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Turn,
    Altitude,
    Circumnavigate,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Turn, Strategy::Altitude, Strategy::Circumnavigate];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Turn => "turn",
            Strategy::Altitude => "altitude",
            Strategy::Circumnavigate => "circumnavigate",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        Strategy::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    Straight,
    Turn,
    Altitude,
    Circumnavigate,
}

impl From<Strategy> for PlanKind {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Turn => PlanKind::Turn,
            Strategy::Altitude => PlanKind::Altitude,
            Strategy::Circumnavigate => PlanKind::Circumnavigate,
        }
    }
}

/// One `executeAgentManeuver` sub-call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverCall {
    pub velocity: Vec3,
    pub quantum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverPlan {
    pub kind: PlanKind,
    pub waypoints: Vec<Vec3>,
    pub maneuver_calls: Vec<ManeuverCall>,
    pub rationale: String,
}

impl ManeuverPlan {
    pub fn total_duration(&self) -> f64 {
        self.maneuver_calls.iter().map(|c| c.quantum).sum()
    }

    /// Position reached by integrating the maneuver calls from the first waypoint.
    pub fn integrated_end(&self) -> Vec3 {
        self.maneuver_calls
            .iter()
            .fold(self.waypoints[0], |p, c| p + c.velocity * c.quantum)
    }

    pub fn end(&self) -> Vec3 {
        *self.waypoints.last().expect("plans always have waypoints")
    }
}

/// Rounds a duration up to the next multiple of the short quantum.
pub fn quantize_duration(seconds: f64) -> f64 {
    if seconds <= 0.0 {
        return 0.0;
    }
    (seconds / SHORT_QUANTUM - 1e-9).ceil() * SHORT_QUANTUM
}

/// Splits a quantized duration into long quanta first, then short ones.
pub fn decompose_duration(seconds: f64) -> Vec<f64> {
    let halves = (seconds / SHORT_QUANTUM).round() as u64;
    let longs = halves / 6;
    let shorts = halves % 6;
    std::iter::repeat_n(LONG_QUANTUM, longs as usize)
        .chain(std::iter::repeat_n(SHORT_QUANTUM, shorts as usize))
        .collect()
}

fn leg_calls(delta: Vec3, nominal_time: f64) -> Vec<ManeuverCall> {
    let duration = quantize_duration(nominal_time);
    if duration == 0.0 {
        return Vec::new();
    }
    let velocity = delta * (1.0 / duration);
    decompose_duration(duration)
        .into_iter()
        .map(|quantum| ManeuverCall { velocity, quantum })
        .collect()
}

fn dedup(points: Vec<Vec3>) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Horizontal frame along the start-to-goal line.
struct PathFrame {
    origin: Vec3,
    along: Vec3,
    left: Vec3,
    length: f64,
}

impl PathFrame {
    fn new(start: Vec3, goal: Vec3) -> Option<Self> {
        let d = (goal - start).with_z(0.0);
        let length = d.horizontal_norm();
        if length == 0.0 {
            return None;
        }
        let along = d * (1.0 / length);
        let left = Vec3::new(-along.y, along.x, 0.0);
        Some(Self { origin: start, along, left, length })
    }

    fn project(&self, p: Vec3) -> (f64, f64) {
        let r = (p - self.origin).with_z(0.0);
        (r.dot(self.along), r.dot(self.left))
    }

    fn point(&self, t: f64, w: f64) -> Vec3 {
        self.origin + self.along * t + self.left * w
    }
}

fn xy_slack(extent: &WorldExtent, p: Vec3) -> f64 {
    (p.x - extent.x_min)
        .min(extent.x_max - p.x)
        .min(p.y - extent.y_min)
        .min(extent.y_max - p.y)
}

/// Plan builder bound to one world extent and vehicle.
#[derive(Debug, Clone)]
pub struct Planner {
    pub extent: WorldExtent,
    pub limits: AgentLimits,
    /// Horizontal speed used for every non-vertical leg.
    pub cruise_speed: f64,
}

impl Planner {
    pub fn new(extent: WorldExtent, limits: AgentLimits) -> Self {
        Self { extent, limits, cruise_speed: limits.max_h_speed }
    }

    fn check_in(&self, p: Vec3) -> Result<(), PlanError> {
        if self.extent.contains(p) {
            Ok(())
        } else {
            Err(PlanError::OutOfBounds(p))
        }
    }

    fn leg_time(&self, delta: Vec3, speed: f64) -> f64 {
        (delta.horizontal_norm() / speed).max(delta.z.abs() / self.limits.max_v_speed)
    }

    fn polyline_calls(&self, waypoints: &[Vec3], speed: f64) -> Vec<ManeuverCall> {
        waypoints
            .windows(2)
            .flat_map(|w| {
                let delta = w[1] - w[0];
                leg_calls(delta, self.leg_time(delta, speed))
            })
            .collect()
    }

    pub fn plan_straight(&self, start: Vec3, goal: Vec3, speed: f64) -> Result<ManeuverPlan, PlanError> {
        self.check_in(start)?;
        self.check_in(goal)?;
        if !(speed > 0.0 && speed <= self.limits.max_h_speed) {
            return Err(PlanError::InvalidParameter(format!("speed {speed} m/s")));
        }
        let waypoints = vec![start, goal];
        let maneuver_calls = self.polyline_calls(&waypoints, speed);
        Ok(ManeuverPlan {
            kind: PlanKind::Straight,
            waypoints,
            maneuver_calls,
            rationale: format!("straight leg to {goal} at {speed} m/s"),
        })
    }

    /// Constant-altitude two-corner detour around the cube footprint inflated
    /// by `margin`: a 45 degree turn out, a pass parallel to the line, and a
    /// 45 degree turn back onto the line past the obstacle.
    pub fn plan_turn_bypass(
        &self,
        start: Vec3,
        goal: Vec3,
        obstacle: &Obstacle,
        margin: f64,
    ) -> Result<ManeuverPlan, PlanError> {
        self.check_in(start)?;
        self.check_in(goal)?;
        if !matches!(obstacle.shape, Shape::Cube { .. }) {
            return Err(PlanError::StrategyInfeasible(format!(
                "turn bypass needs a cube, {} is a {}",
                obstacle.id,
                obstacle.shape.kind()
            )));
        }
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(PlanError::InvalidParameter(format!("margin {margin}")));
        }
        let level_goal = goal.with_z(start.z);
        if obstacle.segment_distance(start, level_goal) > 0.0 {
            return Err(PlanError::StrategyUnnecessary(format!(
                "straight path does not meet {}",
                obstacle.id
            )));
        }
        let frame = PathFrame::new(start, goal)
            .ok_or_else(|| PlanError::StrategyUnnecessary("no horizontal travel".into()))?;

        let (lo, hi) = obstacle.bounds();
        let corners = [
            Vec3::new(lo.x - margin, lo.y - margin, 0.0),
            Vec3::new(hi.x + margin, lo.y - margin, 0.0),
            Vec3::new(lo.x - margin, hi.y + margin, 0.0),
            Vec3::new(hi.x + margin, hi.y + margin, 0.0),
        ];
        let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut wmin, mut wmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in corners {
            let (t, w) = frame.project(c);
            tmin = tmin.min(t);
            tmax = tmax.max(t);
            wmin = wmin.min(w);
            wmax = wmax.max(w);
        }
        if tmin <= 0.0 || tmax >= frame.length {
            return Err(PlanError::StrategyInfeasible(
                "start or goal lies inside the inflated footprint".into(),
            ));
        }

        let z = start.z;
        let route = |w_side: f64| {
            let lead = w_side.abs();
            let q = frame.point((tmin - lead).max(0.0), 0.0).with_z(z);
            let a = frame.point(tmin, w_side).with_z(z);
            let b = frame.point(tmax, w_side).with_z(z);
            let j = frame.point((tmax + lead).min(frame.length), 0.0).with_z(z);
            let slack = xy_slack(&self.extent, a).min(xy_slack(&self.extent, b));
            (vec![start, q, a, b, j], slack)
        };
        let (left, left_slack) = route(wmax);
        let (right, right_slack) = route(wmin);
        let (waypoints, side) = match (left_slack >= 0.0, right_slack >= 0.0) {
            (false, false) => {
                return Err(PlanError::StrategyInfeasible(format!(
                    "detour around {} leaves the world on both sides",
                    obstacle.id
                )))
            }
            (true, false) => (left, "left"),
            (false, true) => (right, "right"),
            (true, true) if right_slack > left_slack + TIE_EPS => (right, "right"),
            (true, true) => (left, "left"),
        };
        let waypoints = dedup(waypoints);
        let maneuver_calls = self.polyline_calls(&waypoints, self.cruise_speed);
        Ok(ManeuverPlan {
            kind: PlanKind::Turn,
            waypoints,
            maneuver_calls,
            rationale: format!(
                "turn {side} around {} with {margin} m margin at constant altitude {z} m",
                obstacle.id
            ),
        })
    }

    /// Climb for a fixed time derived from the stated height bound, cross at
    /// cruise altitude along the straight ground track, then descend at the
    /// goal. Obstacle geometry is never consulted.
    pub fn plan_altitude_bypass(
        &self,
        start: Vec3,
        goal: Vec3,
        height_bound: f64,
        margin: f64,
        ascent_speed: f64,
    ) -> Result<ManeuverPlan, PlanError> {
        self.check_in(start)?;
        self.check_in(goal)?;
        if !(ascent_speed > 0.0 && ascent_speed <= self.limits.max_v_speed + crate::agent::LIMIT_EPS) {
            return Err(PlanError::InvalidParameter(format!("ascent speed {ascent_speed} m/s")));
        }
        if !(height_bound.is_finite() && margin.is_finite() && margin >= 0.0) {
            return Err(PlanError::InvalidParameter("height bound and margin must be finite".into()));
        }
        let target = height_bound + margin;
        if start.z > target {
            return Err(PlanError::BoundNotAboveStart { bound: height_bound, start_z: start.z });
        }
        let ascent_time = quantize_duration((target - start.z) / ascent_speed);
        let cruise = start.z + ascent_time * ascent_speed;
        if cruise > self.extent.z_ceiling {
            return Err(PlanError::CeilingExceeded { cruise, ceiling: self.extent.z_ceiling });
        }

        let top_start = start.with_z(cruise);
        let top_goal = goal.with_z(cruise);
        let waypoints = dedup(vec![start, top_start, top_goal, goal]);

        let mut maneuver_calls: Vec<ManeuverCall> = decompose_duration(ascent_time)
            .into_iter()
            .map(|quantum| ManeuverCall { velocity: Vec3::new(0.0, 0.0, ascent_speed), quantum })
            .collect();
        let cross = top_goal - top_start;
        maneuver_calls.extend(leg_calls(cross, self.leg_time(cross, self.cruise_speed)));
        let descent = goal - top_goal;
        maneuver_calls.extend(leg_calls(descent, descent.z.abs() / ascent_speed));

        Ok(ManeuverPlan {
            kind: PlanKind::Altitude,
            waypoints,
            maneuver_calls,
            rationale: format!(
                "obstacles are bounded by {height_bound} m: climb {ascent_time} s at {ascent_speed} m/s \
                 to {cruise} m, cross, then descend"
            ),
        })
    }

    /// Leaves the line where it meets the clearance circle, follows a polygon
    /// around the sphere on the side away from the center, and rejoins the
    /// line on the far side.
    ///
    /// Polygon vertices sit on radius `(r + clearance) / cos(arc_step / 2)` so
    /// that every chord, not just every vertex, stays outside `r + clearance`.
    pub fn plan_circumnavigation(
        &self,
        start: Vec3,
        goal: Vec3,
        obstacle: &Obstacle,
        clearance: f64,
        arc_step: f64,
    ) -> Result<ManeuverPlan, PlanError> {
        self.check_in(start)?;
        self.check_in(goal)?;
        let Shape::Sphere { center, radius } = obstacle.shape else {
            return Err(PlanError::StrategyInfeasible(format!(
                "circumnavigation needs a sphere, {} is a {}",
                obstacle.id,
                obstacle.shape.kind()
            )));
        };
        if !(arc_step > 0.0 && arc_step <= std::f64::consts::FRAC_PI_2) {
            return Err(PlanError::InvalidParameter(format!("arc step {arc_step} rad")));
        }
        if !(clearance.is_finite() && clearance >= 0.0) {
            return Err(PlanError::InvalidParameter(format!("clearance {clearance}")));
        }
        let boundary = radius + clearance;
        let z = start.z;
        let flat = |p: Vec3| p.with_z(0.0);
        if point_segment_distance(flat(center), flat(start), flat(goal)) >= boundary {
            return Err(PlanError::StrategyUnnecessary(format!(
                "straight path stays outside the clearance boundary of {}",
                obstacle.id
            )));
        }
        let frame = PathFrame::new(start, goal)
            .ok_or_else(|| PlanError::StrategyUnnecessary("no horizontal travel".into()))?;

        let ring = boundary / (arc_step / 2.0).cos();
        let (tc, offset) = frame.project(center);
        let half_chord = (ring * ring - offset * offset).sqrt();
        let (t_enter, t_exit) = (tc - half_chord, tc + half_chord);
        if t_enter < 0.0 || t_exit > frame.length {
            return Err(PlanError::StrategyInfeasible(
                "start or goal lies inside the clearance boundary".into(),
            ));
        }

        // Angles in the (along, left) frame centered on the sphere. A center on
        // or left of the line is passed on the right, counterclockwise.
        let ccw = offset >= 0.0;
        let phi_enter = (-offset).atan2(-half_chord);
        let phi_exit = (-offset).atan2(half_chord);
        let two_pi = std::f64::consts::TAU;
        let sweep = if ccw {
            (phi_exit - phi_enter).rem_euclid(two_pi)
        } else {
            (phi_enter - phi_exit).rem_euclid(two_pi)
        };
        let n = ((sweep / arc_step) - 1e-12).ceil().max(1.0) as usize;
        let h = sweep / n as f64;
        let dir = if ccw { 1.0 } else { -1.0 };

        let center_frame = frame.point(tc, offset);
        let mut waypoints = vec![start, frame.point(t_enter, 0.0).with_z(z)];
        for k in 1..n {
            let phi = phi_enter + dir * h * k as f64;
            let p = center_frame + frame.along * (ring * phi.cos()) + frame.left * (ring * phi.sin());
            waypoints.push(p.with_z(z));
        }
        waypoints.push(frame.point(t_exit, 0.0).with_z(z));
        let waypoints = dedup(waypoints);
        if let Some(p) = waypoints.iter().find(|p| !self.extent.contains(**p)) {
            return Err(PlanError::StrategyInfeasible(format!("arc leaves the world at {p}")));
        }
        let maneuver_calls = self.polyline_calls(&waypoints, self.cruise_speed);
        Ok(ManeuverPlan {
            kind: PlanKind::Circumnavigate,
            waypoints,
            maneuver_calls,
            rationale: format!(
                "circle {} {} outside its {boundary} m clearance boundary in {n} arc steps",
                obstacle.id,
                if ccw { "counterclockwise" } else { "clockwise" }
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::collision_check;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn planner() -> Planner {
        let extent = WorldExtent { x_min: 0.0, x_max: 20.0, y_min: 0.0, y_max: 20.0, z_ceiling: 10.0 };
        Planner::new(extent, AgentLimits::default())
    }

    fn cube() -> Obstacle {
        Obstacle::cube("cube-1", Vec3::new(10.0, 10.0, 2.5), Vec3::new(2.0, 2.0, 5.0), 0.5)
    }

    fn sphere() -> Obstacle {
        Obstacle::sphere("sphere-1", Vec3::new(10.0, 10.0, 1.5), 1.5, 0.5)
    }

    fn assert_reconstructs(plan: &ManeuverPlan) {
        assert!(plan.integrated_end().distance(plan.end()) < 0.05);
        assert!(plan.maneuver_calls.iter().all(|c| is_quantum(c.quantum)));
    }

    #[test]
    fn quantum_decomposition() {
        assert_eq!(decompose_duration(6.0), vec![3.0, 3.0]);
        assert_eq!(decompose_duration(4.5), vec![3.0, 0.5, 0.5, 0.5]);
        assert_eq!(decompose_duration(0.0), Vec::<f64>::new());
        assert_eq!(quantize_duration(0.65), 1.0);
        assert_eq!(quantize_duration(0.5), 0.5);
        assert_eq!(quantize_duration(4.5), 4.5);
    }

    #[test]
    fn straight_plans() {
        let p = planner();
        let plan = p.plan_straight(Vec3::new(1.0, 1.0, 1.0), Vec3::new(13.0, 1.0, 1.0), 2.0).unwrap();
        assert_eq!(plan.maneuver_calls.len(), 2);
        assert!(plan.maneuver_calls.iter().all(|c| c.quantum == 3.0 && c.velocity.x == 2.0));

        let same = p.plan_straight(Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 1.0, 1.0), 2.0).unwrap();
        assert!(same.maneuver_calls.is_empty());

        let short = p.plan_straight(Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 1.0, 1.0), 2.0).unwrap();
        assert_eq!(short.maneuver_calls, vec![ManeuverCall { velocity: Vec3::new(2.0, 0.0, 0.0), quantum: 0.5 }]);

        let odd = p.plan_straight(Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.3, 1.0, 1.0), 2.0).unwrap();
        assert_reconstructs(&odd);
        assert!(matches!(
            p.plan_straight(Vec3::new(-1.0, 1.0, 1.0), Vec3::new(2.0, 1.0, 1.0), 2.0),
            Err(PlanError::OutOfBounds(_))
        ));
    }

    #[test]
    fn turn_bypass_detours_at_constant_altitude() {
        let p = planner();
        let (s, g) = (Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0));
        let plan = p.plan_turn_bypass(s, g, &cube(), 0.5).unwrap();
        assert_eq!(plan.kind, PlanKind::Turn);
        assert!(plan.waypoints.iter().all(|w| w.z == 1.0));
        // Symmetric case goes left of travel, i.e. toward +y here.
        assert!(plan.waypoints.iter().any(|w| w.y > 10.0));
        for w in plan.waypoints.windows(2) {
            let r = collision_check(&[cube()], w[0], w[1]);
            assert!(r.collisions.is_empty() && r.clearance_violations.is_empty());
            assert!(cube().segment_distance(w[0], w[1]) >= 0.5 - 1e-9);
        }
        let last = plan.end();
        assert_eq!(last.y, 10.0);
        assert!(last.x > 11.5);
        assert_reconstructs(&plan);
    }

    #[test]
    fn turn_bypass_picks_side_with_more_room() {
        let p = planner();
        let off = Obstacle::cube("c", Vec3::new(10.0, 12.0, 2.5), Vec3::new(2.0, 2.0, 5.0), 0.5);
        let plan = p
            .plan_turn_bypass(Vec3::new(2.0, 11.5, 1.0), Vec3::new(18.0, 11.5, 1.0), &off, 0.5)
            .unwrap();
        assert!(plan.waypoints.iter().all(|w| w.y <= 11.5));
    }

    #[test]
    fn turn_bypass_errors() {
        let p = planner();
        let s = Vec3::new(2.0, 3.0, 1.0);
        let g = Vec3::new(18.0, 3.0, 1.0);
        assert!(matches!(p.plan_turn_bypass(s, g, &cube(), 0.5), Err(PlanError::StrategyUnnecessary(_))));
        let wall = Obstacle::cube("wall", Vec3::new(10.0, 10.0, 2.5), Vec3::new(2.0, 20.0, 5.0), 0.0);
        assert!(matches!(
            p.plan_turn_bypass(Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0), &wall, 0.5),
            Err(PlanError::StrategyInfeasible(_))
        ));
        assert!(matches!(
            p.plan_turn_bypass(Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0), &sphere(), 0.5),
            Err(PlanError::StrategyInfeasible(_))
        ));
    }

    #[test]
    fn altitude_bypass_quantizes_ascent() {
        let p = planner();
        let (s, g) = (Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0));
        let plan = p.plan_altitude_bypass(s, g, 5.0, 0.5, 1.0).unwrap();
        let ascent: Vec<f64> = plan
            .maneuver_calls
            .iter()
            .take_while(|c| c.velocity.z > 0.0)
            .map(|c| c.quantum)
            .collect();
        assert_eq!(ascent, vec![3.0, 0.5, 0.5, 0.5]);
        assert_eq!(plan.waypoints[1], Vec3::new(2.0, 10.0, 5.5));
        assert!(plan.waypoints.iter().all(|w| w.y == 10.0));
        assert_reconstructs(&plan);
        for w in plan.waypoints.windows(2) {
            assert!(collision_check(&[cube()], w[0], w[1]).collisions.is_empty());
        }
    }

    #[test]
    fn altitude_bypass_edge_cases() {
        let p = planner();
        let g = Vec3::new(18.0, 10.0, 5.5);
        let flat = p.plan_altitude_bypass(Vec3::new(2.0, 10.0, 5.5), g, 5.0, 0.5, 1.0).unwrap();
        assert!(flat.maneuver_calls.iter().all(|c| c.velocity.z == 0.0));
        assert_eq!(flat.waypoints.len(), 2);
        assert!(matches!(
            p.plan_altitude_bypass(Vec3::new(2.0, 10.0, 6.0), g, 5.0, 0.5, 1.0),
            Err(PlanError::BoundNotAboveStart { .. })
        ));
        assert!(matches!(
            p.plan_altitude_bypass(Vec3::new(2.0, 10.0, 1.0), g, 9.8, 0.5, 1.0),
            Err(PlanError::CeilingExceeded { .. })
        ));
    }

    fn min_center_distance(plan: &ManeuverPlan, center: Vec3) -> f64 {
        plan.waypoints
            .windows(2)
            .map(|w| point_segment_distance(center.with_z(0.0), w[0].with_z(0.0), w[1].with_z(0.0)))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn circumnavigation_stays_outside_boundary() {
        let p = planner();
        let (s, g) = (Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0));
        let plan = p.plan_circumnavigation(s, g, &sphere(), 0.5, PI / 16.0).unwrap();
        assert!(min_center_distance(&plan, Vec3::new(10.0, 10.0, 0.0)) >= 2.0 - 1e-9);
        // Centered on the line: counterclockwise, which passes on the right (-y).
        assert!(plan.waypoints.iter().all(|w| w.y <= 10.0 + 1e-12));
        assert_eq!(plan.end().y, 10.0);
        assert_reconstructs(&plan);
        for w in plan.waypoints.windows(2) {
            let r = collision_check(&[sphere()], w[0], w[1]);
            assert!(r.collisions.is_empty() && r.clearance_violations.is_empty());
        }
    }

    #[test]
    fn circumnavigation_goes_around_the_short_way() {
        let p = planner();
        let above = Obstacle::sphere("s", Vec3::new(10.0, 10.8, 1.5), 1.5, 0.5);
        let plan = p
            .plan_circumnavigation(Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0), &above, 0.5, PI / 16.0)
            .unwrap();
        assert!(plan.waypoints.iter().all(|w| w.y <= 10.0 + 1e-12));
        let below = Obstacle::sphere("s", Vec3::new(10.0, 9.2, 1.5), 1.5, 0.5);
        let plan = p
            .plan_circumnavigation(Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0), &below, 0.5, PI / 16.0)
            .unwrap();
        assert!(plan.waypoints.iter().all(|w| w.y >= 10.0 - 1e-12));
    }

    #[test]
    fn finer_arc_hugs_the_boundary_more_tightly() {
        let p = planner();
        let (s, g) = (Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0));
        let c = Vec3::new(10.0, 10.0, 0.0);
        let coarse = p.plan_circumnavigation(s, g, &sphere(), 0.5, PI / 16.0).unwrap();
        let fine = p.plan_circumnavigation(s, g, &sphere(), 0.5, PI / 64.0).unwrap();
        assert!(min_center_distance(&fine, c) >= min_center_distance(&coarse, c) - 1e-9);
        let max_r = |plan: &ManeuverPlan| {
            plan.waypoints
                .iter()
                .map(|w| w.horizontal_distance(c))
                .filter(|r| *r < 3.0)
                .fold(0.0, f64::max)
        };
        assert!(max_r(&fine) < max_r(&coarse));
    }

    #[test]
    fn circumnavigation_errors() {
        let p = planner();
        assert!(matches!(
            p.plan_circumnavigation(Vec3::new(2.0, 4.0, 1.0), Vec3::new(18.0, 4.0, 1.0), &sphere(), 0.5, PI / 16.0),
            Err(PlanError::StrategyUnnecessary(_))
        ));
        let edge = Obstacle::sphere("edge", Vec3::new(10.0, 1.5, 1.5), 1.5, 0.5);
        assert!(matches!(
            p.plan_circumnavigation(Vec3::new(2.0, 1.5, 1.0), Vec3::new(18.0, 1.5, 1.0), &edge, 0.5, PI / 16.0),
            Err(PlanError::StrategyInfeasible(_))
        ));
    }

    #[test]
    fn plans_are_deterministic() {
        let p = planner();
        let (s, g) = (Vec3::new(2.0, 10.0, 1.0), Vec3::new(18.0, 10.0, 1.0));
        assert_eq!(p.plan_turn_bypass(s, g, &cube(), 0.5), p.plan_turn_bypass(s, g, &cube(), 0.5));
        assert_eq!(
            p.plan_circumnavigation(s, g, &sphere(), 0.5, 0.2),
            p.plan_circumnavigation(s, g, &sphere(), 0.5, 0.2)
        );
        let straight = p.plan_straight(s, g, 2.0).unwrap();
        let alt = p.plan_altitude_bypass(s, g, 5.0, 0.5, 1.0).unwrap();
        let ground = |plan: &ManeuverPlan| plan.waypoints.iter().map(|w| (w.x, w.y)).collect::<Vec<_>>();
        let mut alt_ground = ground(&alt);
        alt_ground.dedup();
        assert_eq!(alt_ground, ground(&straight));
        assert_relative_eq!(alt.total_duration(), 4.5 + 8.0 + 4.5);
    }
}
