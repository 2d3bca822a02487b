//! The single-writer session that executes stream calls and records them.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{StreamError, StreamName, StreamRecord};
use crate::agent::{step, AgentError, AgentLimits, Pose, TrajectorySample, VelocityCommand};
use crate::geometry::Vec3;
use crate::mission::LoadedMission;
use crate::planner::{is_quantum, ManeuverPlan, PlanError, Planner, Strategy};
use crate::world::{collision_check, CellIndex, GridMap, Obstacle, WorldExtent, WorldSpec};

/// Motion may end this far outside the extent (integration round-off).
const BOUNDS_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub limits: AgentLimits,
    /// Spacing of recorded trajectory samples, seconds.
    pub sample_dt: f64,
    /// Angular spacing of circumnavigation vertices, radians.
    pub arc_step: f64,
    /// Climb rate used by the altitude strategy, m/s.
    pub ascent_speed: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let limits = AgentLimits::default();
        Self {
            limits,
            sample_dt: 0.5,
            arc_step: std::f64::consts::PI / 8.0,
            ascent_speed: limits.max_v_speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub extent: WorldExtent,
    pub resolution: f64,
    pub cells: [usize; 2],
    pub occupied_cells: usize,
    pub obstacle_count: usize,
    pub obstacle_ids: Vec<String>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPositionReport {
    pub pose: Pose,
    pub cell: CellIndex,
    /// Occupancy at the agent's altitude; row 0 is north, column 0 is west,
    /// the centre is the agent's own cell. Cells outside the world read 1.
    pub neighborhood: [[u8; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub pose: Pose,
    pub sim_time: f64,
    /// Obstacles whose solid the swept segment touched.
    pub collisions: Vec<String>,
    /// Obstacles whose clearance boundary the swept segment entered.
    pub clearance_violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub call_id: u64,
    pub sim_time: f64,
    pub obstacle_id: String,
    pub from: Vec3,
    pub to: Vec3,
}

#[derive(Deserialize)]
struct MissionArgs {
    mission_id: String,
}

#[derive(Deserialize)]
struct MoveArgs {
    vx: f64,
    vy: f64,
    vz: f64,
    duration: f64,
}

#[derive(Deserialize)]
struct AvoidArgs {
    obstacle_id: String,
    strategy: Strategy,
    #[serde(default)]
    height_bound: Option<f64>,
}

#[derive(Deserialize)]
struct ObstacleArgs {
    obstacle_id: String,
}

#[derive(Deserialize)]
struct ManeuverArgs {
    vx: f64,
    vy: f64,
    vz: f64,
    quantum: f64,
}

#[derive(Debug, Clone)]
struct Active {
    mission: LoadedMission,
    grid: Option<GridMap>,
    world: Option<WorldSpec>,
}

/// Owns the simulation state for a set of missions and the call log.
///
/// Calls execute strictly one after another; other threads must hand their
/// calls to the owner.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    catalog: BTreeMap<String, LoadedMission>,
    active: Option<Active>,
    pose: Pose,
    clock: f64,
    next_call_id: u64,
    burst: u64,
    current_avoid: Option<u64>,
    records: Vec<StreamRecord>,
    trajectory: Vec<TrajectorySample>,
    collisions: Vec<CollisionEvent>,
    clearance_violations: Vec<CollisionEvent>,
}

impl Session {
    pub fn new(missions: impl IntoIterator<Item = LoadedMission>, config: SessionConfig) -> Self {
        Self {
            config,
            catalog: missions.into_iter().map(|m| (m.id().to_string(), m)).collect(),
            active: None,
            pose: Pose::default(),
            clock: 0.0,
            next_call_id: 1,
            burst: 0,
            current_avoid: None,
            records: Vec::new(),
            trajectory: Vec::new(),
            collisions: Vec::new(),
            clearance_violations: Vec::new(),
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn mission_ids(&self) -> impl Iterator<Item = &str> {
        self.catalog.keys().map(String::as_str)
    }

    pub fn mission(&self, id: &str) -> Option<&LoadedMission> {
        self.catalog.get(id)
    }

    pub fn active_mission(&self) -> Option<&LoadedMission> {
        self.active.as_ref().map(|a| &a.mission)
    }

    pub fn grid(&self) -> Option<&GridMap> {
        self.active.as_ref()?.grid.as_ref()
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn sim_time(&self) -> f64 {
        self.clock
    }

    pub fn burst(&self) -> u64 {
        self.burst
    }

    pub fn records(&self) -> &[StreamRecord] {
        &self.records
    }

    pub fn trajectory(&self) -> &[TrajectorySample] {
        &self.trajectory
    }

    pub fn collisions(&self) -> &[CollisionEvent] {
        &self.collisions
    }

    pub fn clearance_violations(&self) -> &[CollisionEvent] {
        &self.clearance_violations
    }

    /// Starts a new group of calls (one model turn or one control step).
    pub fn begin_burst(&mut self) -> u64 {
        self.burst += 1;
        self.current_avoid = None;
        self.burst
    }

    /// Closes the active mission so another may be started.
    pub fn finish_mission(&mut self) {
        self.active = None;
    }

    /// Executes one call given by wire name and JSON arguments.
    ///
    /// Arguments are checked against the stream's schema first; calls that
    /// fail the schema or name an unknown stream are rejected without being
    /// logged. Every other call is logged, whether it succeeds or not.
    pub fn invoke(&mut self, name: &str, args: &Value) -> Result<Value, StreamError> {
        let stream: StreamName = name.parse()?;
        stream
            .schema()
            .validate_args(args)
            .map_err(|error| StreamError::InvalidArguments { stream: name.to_string(), error })?;

        let call_id = self.next_call_id;
        self.next_call_id += 1;
        let mut parent = None;
        let outcome = self.dispatch(stream, args, call_id, &mut parent);
        let result = match &outcome {
            Ok(v) => json!({ "ok": v }),
            Err(e) => json!({ "error": e.to_json() }),
        };
        self.records.push(StreamRecord {
            call_id,
            burst: self.burst,
            sim_time: self.clock,
            name: stream,
            args: args.clone(),
            result,
            direction: stream.direction(),
            parent,
        });
        outcome
    }

    fn dispatch(
        &mut self,
        stream: StreamName,
        args: &Value,
        call_id: u64,
        parent: &mut Option<u64>,
    ) -> Result<Value, StreamError> {
        match stream {
            StreamName::StartMission => {
                let a: MissionArgs = parse(args)?;
                to_value(self.do_start(&a.mission_id)?)
            }
            StreamName::GetMissionCoordinates => {
                let a: MissionArgs = parse(args)?;
                let active = self.active()?;
                let m = if a.mission_id == active.mission.id() {
                    &active.mission
                } else {
                    self.catalog
                        .get(&a.mission_id)
                        .ok_or_else(|| StreamError::MissionNotFound(a.mission_id.clone()))?
                };
                Ok(json!({ "start": m.spec.start, "goal": m.spec.goal }))
            }
            StreamName::SenseEnvironment => to_value(self.do_sense()?),
            StreamName::GetAgentPosition => to_value(self.do_position()?),
            StreamName::MoveAgent => {
                let a: MoveArgs = parse(args)?;
                let cmd = VelocityCommand::new(Vec3::new(a.vx, a.vy, a.vz), a.duration);
                to_value(self.fly(cmd, call_id)?)
            }
            StreamName::AvoidObstacle => {
                let a: AvoidArgs = parse(args)?;
                let plan = self.do_avoid(&a)?;
                self.current_avoid = Some(call_id);
                to_value(plan)
            }
            StreamName::GetObstacleDimensions => {
                let a: ObstacleArgs = parse(args)?;
                to_value(self.obstacle(&a.obstacle_id)?.clone())
            }
            StreamName::ExecuteAgentManeuver => {
                let a: ManeuverArgs = parse(args)?;
                self.active()?;
                if !is_quantum(a.quantum) {
                    return Err(StreamError::InvalidQuantum(a.quantum));
                }
                *parent = self.current_avoid;
                let cmd = VelocityCommand::new(Vec3::new(a.vx, a.vy, a.vz), a.quantum);
                to_value(self.fly(cmd, call_id)?)
            }
        }
    }

    fn active(&self) -> Result<&Active, StreamError> {
        self.active.as_ref().ok_or(StreamError::NoActiveMission)
    }

    fn obstacle(&self, id: &str) -> Result<&Obstacle, StreamError> {
        let active = self.active()?;
        let world = active.world.as_ref().unwrap_or(&active.mission.world);
        world.obstacle(id).ok_or_else(|| StreamError::ObstacleNotFound(id.to_string()))
    }

    fn do_start(&mut self, id: &str) -> Result<Vec<&'static str>, StreamError> {
        if let Some(active) = &self.active {
            return Err(StreamError::MissionAlreadyActive(active.mission.id().to_string()));
        }
        let mission = self
            .catalog
            .get(id)
            .cloned()
            .ok_or_else(|| StreamError::MissionNotFound(id.to_string()))?;
        self.pose = Pose::at(mission.spec.start);
        self.trajectory.push(TrajectorySample { t: self.clock, pose: self.pose });
        self.active = Some(Active { mission, grid: None, world: None });
        Ok(StreamName::ALL.iter().map(|n| n.as_str()).collect())
    }

    fn do_sense(&mut self) -> Result<EnvironmentSummary, StreamError> {
        let active = self.active.as_mut().ok_or(StreamError::NoActiveMission)?;
        let world = match &active.mission.world_path {
            Some(path) => WorldSpec::load(path)
                .map_err(|e| StreamError::WorldFileInvalid(e.to_string()))?,
            None => active.mission.world.clone(),
        };
        let grid = world
            .build_grid()
            .map_err(|e| StreamError::WorldFileInvalid(e.to_string()))?;
        let (nx, ny) = grid.dims();
        let summary = EnvironmentSummary {
            extent: world.extent,
            resolution: world.resolution,
            cells: [nx, ny],
            occupied_cells: grid.occupied_count(),
            obstacle_count: world.obstacles.len(),
            obstacle_ids: world.obstacles.iter().map(|o| o.id.clone()).collect(),
            digest: grid.digest(),
        };
        active.grid = Some(grid);
        active.world = Some(world);
        Ok(summary)
    }

    fn do_position(&self) -> Result<AgentPositionReport, StreamError> {
        let grid = self
            .active()?
            .grid
            .as_ref()
            .ok_or(StreamError::EnvironmentNotSensed)?;
        let p = self.pose.position;
        let cell = grid.cell_index(p).map_err(|_| StreamError::OutOfBounds(p))?;
        let (nx, ny) = grid.dims();
        let mut neighborhood = [[1u8; 3]; 3];
        for (row, dy) in [1i64, 0, -1].into_iter().enumerate() {
            for (col, dx) in [-1i64, 0, 1].into_iter().enumerate() {
                let ix = cell.ix as i64 + dx;
                let iy = cell.iy as i64 + dy;
                if ix < 0 || iy < 0 || ix >= nx as i64 || iy >= ny as i64 {
                    continue;
                }
                let probe = if dx == 0 && dy == 0 {
                    p
                } else {
                    let rect = grid.cell_rect(CellIndex { ix: ix as usize, iy: iy as usize });
                    let (cx, cy) = rect.center();
                    Vec3::new(cx, cy, p.z)
                };
                neighborhood[row][col] = grid.query_occupancy(probe).unwrap_or(1);
            }
        }
        Ok(AgentPositionReport { pose: self.pose, cell, neighborhood })
    }

    fn do_avoid(&self, a: &AvoidArgs) -> Result<ManeuverPlan, StreamError> {
        let active = self.active()?;
        let spec = &active.mission.spec;
        let obstacle = self.obstacle(&a.obstacle_id)?;
        if !spec.strategy.allows(a.strategy) {
            return Err(StreamError::StrategyInfeasible(format!(
                "mission {} does not allow the {} strategy",
                spec.id,
                a.strategy.as_str()
            )));
        }
        let planner = Planner::new(active.mission.world.extent, self.config.limits);
        let start = self.pose.position;
        let goal = spec.goal;
        let plan = match a.strategy {
            Strategy::Turn => {
                planner.plan_turn_bypass(start, goal, obstacle, spec.margin.max(obstacle.clearance))
            }
            Strategy::Altitude => {
                let bound = a.height_bound.or(spec.height_bound).ok_or_else(|| {
                    StreamError::StrategyInfeasible("altitude strategy needs a height bound".into())
                })?;
                planner.plan_altitude_bypass(start, goal, bound, spec.margin, self.config.ascent_speed)
            }
            Strategy::Circumnavigate => planner.plan_circumnavigation(
                start,
                goal,
                obstacle,
                spec.margin.max(obstacle.clearance),
                self.config.arc_step,
            ),
        };
        plan.map_err(|e| match e {
            PlanError::StrategyUnnecessary(m) => StreamError::StrategyUnnecessary(m),
            other => StreamError::StrategyInfeasible(other.to_string()),
        })
    }

    /// Moves the agent under `cmd`, recording trajectory samples and contacts.
    fn fly(&mut self, cmd: VelocityCommand, call_id: u64) -> Result<MoveOutcome, StreamError> {
        let extent = self.active()?.mission.world.extent;
        let limits = self.config.limits;
        limits.check(&cmd).map_err(|e| match e {
            AgentError::LimitExceeded(m) => StreamError::LimitExceeded(m),
            other => StreamError::LimitExceeded(other.to_string()),
        })?;
        let start = self.pose;
        let end = step(start, &cmd, cmd.duration, &limits)
            .map_err(|e| StreamError::LimitExceeded(e.to_string()))?;
        let p = end.position;
        let inside = p.x >= extent.x_min - BOUNDS_SLACK
            && p.x <= extent.x_max + BOUNDS_SLACK
            && p.y >= extent.y_min - BOUNDS_SLACK
            && p.y <= extent.y_max + BOUNDS_SLACK
            && p.z >= -BOUNDS_SLACK
            && p.z <= extent.z_ceiling + BOUNDS_SLACK;
        if !inside {
            return Err(StreamError::OutOfBounds(p));
        }

        let t0 = self.clock;
        let dt = self.config.sample_dt;
        let mut k = 1u64;
        while (k as f64) * dt < cmd.duration - 1e-12 {
            let t = k as f64 * dt;
            let pose = step(start, &cmd, t, &limits).expect("command already validated");
            self.trajectory.push(TrajectorySample { t: t0 + t, pose });
            k += 1;
        }
        self.clock = t0 + cmd.duration;
        self.pose = end;
        self.trajectory.push(TrajectorySample { t: self.clock, pose: end });

        let obstacles = match &self.active()?.world {
            Some(w) => w.obstacles.clone(),
            None => self.active()?.mission.world.obstacles.clone(),
        };
        let report = collision_check(&obstacles, start.position, end.position);
        let event = |id: &String| CollisionEvent {
            call_id,
            sim_time: self.clock,
            obstacle_id: id.clone(),
            from: start.position,
            to: end.position,
        };
        let hits: Vec<_> = report.collisions.iter().map(event).collect();
        let near: Vec<_> = report.clearance_violations.iter().map(event).collect();
        self.collisions.extend(hits);
        self.clearance_violations.extend(near);
        Ok(MoveOutcome {
            pose: end,
            sim_time: self.clock,
            collisions: report.collisions,
            clearance_violations: report.clearance_violations,
        })
    }

    // Typed conveniences over `invoke`.

    pub fn start_mission(&mut self, mission_id: &str) -> Result<Vec<String>, StreamError> {
        self.call(StreamName::StartMission, json!({ "mission_id": mission_id }))
    }

    pub fn get_mission_coordinates(&mut self, mission_id: &str) -> Result<(Vec3, Vec3), StreamError> {
        let v: Value = self.call(StreamName::GetMissionCoordinates, json!({ "mission_id": mission_id }))?;
        Ok((from_value(&v["start"]), from_value(&v["goal"])))
    }

    pub fn sense_environment(&mut self) -> Result<EnvironmentSummary, StreamError> {
        self.call(StreamName::SenseEnvironment, json!({}))
    }

    pub fn get_agent_position(&mut self) -> Result<AgentPositionReport, StreamError> {
        self.call(StreamName::GetAgentPosition, json!({}))
    }

    pub fn move_agent(&mut self, cmd: VelocityCommand) -> Result<MoveOutcome, StreamError> {
        self.call(
            StreamName::MoveAgent,
            json!({ "vx": cmd.vx, "vy": cmd.vy, "vz": cmd.vz, "duration": cmd.duration }),
        )
    }

    pub fn avoid_obstacle(
        &mut self,
        obstacle_id: &str,
        strategy: Strategy,
        height_bound: Option<f64>,
    ) -> Result<ManeuverPlan, StreamError> {
        let mut args = json!({ "obstacle_id": obstacle_id, "strategy": strategy.as_str() });
        if let Some(b) = height_bound {
            args["height_bound"] = json!(b);
        }
        self.call(StreamName::AvoidObstacle, args)
    }

    pub fn get_obstacle_dimensions(&mut self, obstacle_id: &str) -> Result<Obstacle, StreamError> {
        self.call(StreamName::GetObstacleDimensions, json!({ "obstacle_id": obstacle_id }))
    }

    pub fn execute_agent_maneuver(&mut self, velocity: Vec3, quantum: f64) -> Result<MoveOutcome, StreamError> {
        self.call(
            StreamName::ExecuteAgentManeuver,
            json!({ "vx": velocity.x, "vy": velocity.y, "vz": velocity.z, "quantum": quantum }),
        )
    }

    fn call<T: DeserializeOwned>(&mut self, stream: StreamName, args: Value) -> Result<T, StreamError> {
        let v = self.invoke(stream.as_str(), &args)?;
        Ok(serde_json::from_value(v).expect("stream results deserialize into their own types"))
    }
}

fn parse<T: DeserializeOwned>(args: &Value) -> Result<T, StreamError> {
    // The schema check already ran, so this only fails on a registry bug.
    serde_json::from_value(args.clone()).map_err(|e| StreamError::InvalidArguments {
        stream: "<typed>".into(),
        error: super::SchemaError { field: "<arguments>".into(), reason: e.to_string() },
    })
}

fn to_value<T: Serialize>(v: T) -> Result<Value, StreamError> {
    Ok(serde_json::to_value(v).expect("stream results are serializable"))
}

fn from_value<T: DeserializeOwned>(v: &Value) -> T {
    serde_json::from_value(v.clone()).expect("stream results deserialize into their own types")
}
