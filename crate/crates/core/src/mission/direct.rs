//! Direct control: the stream sequence issued by a fixed program instead of a
//! model, using planner output only.
//!
//! Bursts: `startMission` + `getMissionCoordinates`; `senseEnvironment`,
//! `getObstacleDimensions` for every obstacle and `getAgentPosition`; then,
//! until the goal is reached, either an `avoidObstacle` with its maneuver
//! sub-calls or `moveAgent` legs toward the goal, each closed by
//! `getAgentPosition`.

use thiserror::Error;

use super::log::{MissionLog, RunMode, RunStatus};
use super::runner::{NoopObserver, RunObserver, RunPhase};
use super::{LoadedMission, StrategyConstraint};
use crate::agent::VelocityCommand;
use crate::geometry::Vec3;
use crate::planner::{Planner, Strategy};
use crate::streams::{Session, SessionConfig, StreamError};
use crate::world::{collision_check, Obstacle, Shape, CLEARANCE_EPS};

/// Upper bound on plan-and-move iterations before giving up.
pub const MAX_DIRECT_STEPS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("world file is invalid: {0}")]
    WorldFileInvalid(String),
    #[error("planning failed: {0}")]
    PlanningFailed(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),
}

/// The obstacle a straight flight from `from` to `to` runs into first, if any.
///
/// A box blocks when the segment touches its solid; a sphere blocks when the
/// segment enters its clearance boundary (the sphere detour is sized by it).
pub fn first_blocking<'a>(obstacles: &'a [Obstacle], from: Vec3, to: Vec3) -> Option<&'a Obstacle> {
    let dir = to - from;
    obstacles
        .iter()
        .filter(|o| {
            let d = o.segment_distance(from, to);
            match o.shape {
                Shape::Cube { .. } => d <= 0.0,
                Shape::Sphere { .. } => d < o.clearance - CLEARANCE_EPS,
            }
        })
        .min_by(|a, b| {
            let ka = (a.shape.center() - from).dot(dir);
            let kb = (b.shape.center() - from).dot(dir);
            ka.total_cmp(&kb).then_with(|| a.id.cmp(&b.id))
        })
}

fn choose_strategy(constraint: StrategyConstraint, obstacle: &Obstacle) -> Strategy {
    match constraint {
        StrategyConstraint::AltitudeOnly => Strategy::Altitude,
        StrategyConstraint::Circumnavigate => Strategy::Circumnavigate,
        StrategyConstraint::Any => match obstacle.shape {
            Shape::Cube { .. } => Strategy::Turn,
            Shape::Sphere { .. } => Strategy::Circumnavigate,
        },
    }
}

/// Hands records appended since the last flush to the observer.
struct Feed<'a> {
    observer: &'a mut dyn RunObserver,
    seen: usize,
}

impl Feed<'_> {
    fn flush(&mut self, s: &Session) {
        for rec in &s.records()[self.seen..] {
            self.observer.record(rec, s, None);
        }
        self.seen = s.records().len();
    }
}

/// Flies `mission` under direct control.
pub fn run_direct(mission: &LoadedMission, config: SessionConfig) -> Result<MissionLog, RunError> {
    run_direct_observed(mission, config, &mut NoopObserver)
}

/// [`run_direct`] reporting every stream call to `observer` as it happens.
pub fn run_direct_observed(
    mission: &LoadedMission,
    config: SessionConfig,
    observer: &mut dyn RunObserver,
) -> Result<MissionLog, RunError> {
    let spec = &mission.spec;
    let mut s = Session::new([mission.clone()], config);
    observer.phase(RunPhase::Executing);
    let mut feed = Feed { observer, seen: 0 };

    s.begin_burst();
    s.start_mission(&spec.id)?;
    let (_, goal) = s.get_mission_coordinates(&spec.id)?;
    feed.flush(&s);

    s.begin_burst();
    let env = s.sense_environment().map_err(|e| match e {
        StreamError::WorldFileInvalid(m) => RunError::WorldFileInvalid(m),
        other => other.into(),
    })?;
    let mut obstacles = Vec::with_capacity(env.obstacle_ids.len());
    for id in &env.obstacle_ids {
        obstacles.push(s.get_obstacle_dimensions(id)?);
    }
    s.get_agent_position()?;
    feed.flush(&s);

    let planner = Planner::new(env.extent, config.limits);
    let mut status = RunStatus::Halted;
    let mut halt_reason = None;
    let mut steps = 0;
    loop {
        let pos = s.pose().position;
        if pos.distance(goal) <= spec.goal_tolerance {
            status = RunStatus::Reached;
            break;
        }
        if s.sim_time() > spec.timeout_s {
            halt_reason = Some(format!("sim time {} s exceeded the {} s timeout", s.sim_time(), spec.timeout_s));
            break;
        }
        steps += 1;
        if steps > MAX_DIRECT_STEPS {
            return Err(RunError::PlanningFailed(format!("goal not reached after {MAX_DIRECT_STEPS} steps")));
        }

        s.begin_burst();
        match first_blocking(&obstacles, pos, goal) {
            Some(obstacle) => {
                let strategy = choose_strategy(spec.strategy, obstacle);
                let plan = s
                    .avoid_obstacle(&obstacle.id, strategy, None)
                    .map_err(|e| RunError::PlanningFailed(format!("{} around {}: {e}", strategy.as_str(), obstacle.id)))?;
                feed.flush(&s);
                for w in plan.waypoints.windows(2) {
                    let report = collision_check(&obstacles, w[0], w[1]);
                    if !report.is_clear() {
                        return Err(RunError::PlanningFailed(format!(
                            "{} plan around {} hits {:?}",
                            strategy.as_str(),
                            obstacle.id,
                            report.collisions
                        )));
                    }
                }
                for c in &plan.maneuver_calls {
                    s.execute_agent_maneuver(c.velocity, c.quantum)?;
                    feed.flush(&s);
                }
            }
            None => {
                let plan = planner
                    .plan_straight(pos, goal, planner.cruise_speed)
                    .map_err(|e| RunError::PlanningFailed(e.to_string()))?;
                // Consecutive quanta share one velocity; fly them as one move.
                let mut legs: Vec<(Vec3, f64)> = Vec::new();
                for c in &plan.maneuver_calls {
                    match legs.last_mut() {
                        Some((v, d)) if *v == c.velocity => *d += c.quantum,
                        _ => legs.push((c.velocity, c.quantum)),
                    }
                }
                for (v, d) in legs {
                    s.move_agent(VelocityCommand::new(v, d))?;
                    feed.flush(&s);
                }
            }
        }
        s.get_agent_position()?;
        feed.flush(&s);
    }

    Ok(MissionLog {
        mission: LoadedMission::inline(spec.clone(), mission.world.clone())
            .expect("a loaded mission stays valid")
            .spec,
        mode: RunMode::Direct,
        session_config: config,
        model: None,
        records: s.records().to_vec(),
        trajectory: s.trajectory().to_vec(),
        collisions: s.collisions().to_vec(),
        clearance_violations: s.clearance_violations().to_vec(),
        transcript: vec![],
        budget: None,
        calls_used: 0,
        status,
        halt_reason,
        final_pose: s.pose(),
        sim_time: s.sim_time(),
    })
}
