//! The eight interaction streams between the language model, the control
//! layer and the simulated vehicle.
//!
//! Every stream is tagged with the layer it primarily touches (1 = mission
//! control, 2 = agent, 3 = environment) and with a direction: downstream calls
//! push commands from the model toward the vehicle, upstream calls pull
//! observations back. All calls go through one [`Session`], which owns the
//! simulation state and writes the append-only call log.

mod ordering;
mod schema;
mod session;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use ordering::{validate_ordering, OrderingViolation};
pub use schema::{ParamKind, ParamSpec, SchemaError, ToolSchema};
pub use session::{
    AgentPositionReport, CollisionEvent, EnvironmentSummary, MoveOutcome, Session, SessionConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StreamName {
    #[serde(rename = "startMission")]
    StartMission,
    #[serde(rename = "getMissionCoordinates")]
    GetMissionCoordinates,
    #[serde(rename = "senseEnvironment")]
    SenseEnvironment,
    #[serde(rename = "getAgentPosition")]
    GetAgentPosition,
    #[serde(rename = "moveAgent")]
    MoveAgent,
    #[serde(rename = "avoidObstacle")]
    AvoidObstacle,
    #[serde(rename = "getObstacleDimensions")]
    GetObstacleDimensions,
    #[serde(rename = "executeAgentManeuver")]
    ExecuteAgentManeuver,
}

impl StreamName {
    pub const ALL: [StreamName; 8] = [
        StreamName::StartMission,
        StreamName::GetMissionCoordinates,
        StreamName::SenseEnvironment,
        StreamName::GetAgentPosition,
        StreamName::MoveAgent,
        StreamName::AvoidObstacle,
        StreamName::GetObstacleDimensions,
        StreamName::ExecuteAgentManeuver,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StreamName::StartMission => "startMission",
            StreamName::GetMissionCoordinates => "getMissionCoordinates",
            StreamName::SenseEnvironment => "senseEnvironment",
            StreamName::GetAgentPosition => "getAgentPosition",
            StreamName::MoveAgent => "moveAgent",
            StreamName::AvoidObstacle => "avoidObstacle",
            StreamName::GetObstacleDimensions => "getObstacleDimensions",
            StreamName::ExecuteAgentManeuver => "executeAgentManeuver",
        }
    }

    pub fn direction(self) -> StreamDirection {
        use Sense::*;
        let (sense, layer) = match self {
            StreamName::StartMission => (Downstream, 1),
            StreamName::GetMissionCoordinates => (Upstream, 1),
            StreamName::SenseEnvironment => (Upstream, 3),
            StreamName::GetAgentPosition => (Upstream, 2),
            StreamName::MoveAgent => (Downstream, 3),
            StreamName::AvoidObstacle => (Downstream, 1),
            StreamName::GetObstacleDimensions => (Upstream, 3),
            StreamName::ExecuteAgentManeuver => (Downstream, 2),
        };
        StreamDirection { sense, layer }
    }

    pub fn schema(self) -> ToolSchema {
        let (description, parameters) = match self {
            StreamName::StartMission => (
                "Activate a mission by its identifier. Must be called before any other tool.",
                vec![ParamSpec::string("mission_id", "Identifier of the mission to start")],
            ),
            StreamName::GetMissionCoordinates => (
                "Return the start and goal coordinates (x, y, z in meters) of a mission.",
                vec![ParamSpec::string("mission_id", "Identifier of the mission")],
            ),
            StreamName::SenseEnvironment => (
                "Scan the surroundings and build the occupancy grid. Returns the world extent, \
                 grid resolution and the identifiers of the detected obstacles.",
                vec![],
            ),
            StreamName::GetAgentPosition => (
                "Return the UAV pose (position, yaw, roll, pitch), its grid cell and the \
                 occupancy of the eight neighbouring cells at the current altitude.",
                vec![],
            ),
            StreamName::MoveAgent => (
                "Fly with a constant velocity (m/s, world frame) for the given number of seconds. \
                 Horizontal speed is limited to 2 m/s and vertical speed to 1 m/s.",
                vec![
                    ParamSpec::number("vx", "Velocity along x (east), m/s"),
                    ParamSpec::number("vy", "Velocity along y (north), m/s"),
                    ParamSpec::number("vz", "Velocity along z (up), m/s"),
                    ParamSpec::number("duration", "Flight time in seconds, > 0"),
                ],
            ),
            StreamName::AvoidObstacle => (
                "Plan a way past an obstacle toward the mission goal. Strategies: 'turn' \
                 (sideways detour around a box), 'altitude' (climb above a known height bound, \
                 cross, descend), 'circumnavigate' (fly around a sphere). Returns waypoints and \
                 the executeAgentManeuver calls that fly them.",
                vec![
                    ParamSpec::string("obstacle_id", "Identifier of the obstacle to avoid"),
                    ParamSpec::one_of(
                        "strategy",
                        &["turn", "altitude", "circumnavigate"],
                        "Avoidance strategy",
                    ),
                    ParamSpec::number(
                        "height_bound",
                        "For 'altitude': the known upper bound on obstacle height, meters",
                    )
                    .optional(),
                ],
            ),
            StreamName::GetObstacleDimensions => (
                "Return the shape, position, size and required clearance of an obstacle.",
                vec![ParamSpec::string("obstacle_id", "Identifier of the obstacle")],
            ),
            StreamName::ExecuteAgentManeuver => (
                "Execute one step of a planned maneuver: fly with the given velocity for one \
                 time quantum, which must be exactly 0.5 or 3 seconds.",
                vec![
                    ParamSpec::number("vx", "Velocity along x (east), m/s"),
                    ParamSpec::number("vy", "Velocity along y (north), m/s"),
                    ParamSpec::number("vz", "Velocity along z (up), m/s"),
                    ParamSpec::number("quantum", "Step duration: 0.5 or 3 seconds"),
                ],
            ),
        };
        ToolSchema { name: self.as_str().into(), description: description.into(), parameters }
    }
}

impl fmt::Display for StreamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StreamName {
    type Err = StreamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StreamName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| StreamError::UnknownStream(s.to_string()))
    }
}

/// Schemas of all eight streams, in registry order.
pub fn all_schemas() -> Vec<ToolSchema> {
    StreamName::ALL.iter().map(|n| n.schema()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// Model toward vehicle: commands.
    Downstream,
    /// Vehicle toward model: observations.
    Upstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamDirection {
    pub sense: Sense,
    pub layer: u8,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("mission `{0}` not found")]
    MissionNotFound(String),
    #[error("mission `{0}` is already active")]
    MissionAlreadyActive(String),
    #[error("no mission is active; call startMission first")]
    NoActiveMission,
    #[error("environment has not been sensed; call senseEnvironment first")]
    EnvironmentNotSensed,
    #[error("world file is invalid: {0}")]
    WorldFileInvalid(String),
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("quantum {0} s is not one of 0.5 or 3")]
    InvalidQuantum(f64),
    #[error("obstacle `{0}` not found")]
    ObstacleNotFound(String),
    #[error("strategy infeasible: {0}")]
    StrategyInfeasible(String),
    #[error("strategy unnecessary: {0}")]
    StrategyUnnecessary(String),
    #[error("target {0} is outside the world")]
    OutOfBounds(crate::geometry::Vec3),
    #[error("unknown stream `{0}`")]
    UnknownStream(String),
    #[error("invalid arguments for {stream}: {error}")]
    InvalidArguments { stream: String, error: SchemaError },
}

impl StreamError {
    /// Stable machine-readable name, used in logs and tool results.
    pub fn kind(&self) -> &'static str {
        match self {
            StreamError::MissionNotFound(_) => "MissionNotFound",
            StreamError::MissionAlreadyActive(_) => "MissionAlreadyActive",
            StreamError::NoActiveMission => "NoActiveMission",
            StreamError::EnvironmentNotSensed => "EnvironmentNotSensed",
            StreamError::WorldFileInvalid(_) => "WorldFileInvalid",
            StreamError::LimitExceeded(_) => "LimitExceeded",
            StreamError::InvalidQuantum(_) => "InvalidQuantum",
            StreamError::ObstacleNotFound(_) => "ObstacleNotFound",
            StreamError::StrategyInfeasible(_) => "StrategyInfeasible",
            StreamError::StrategyUnnecessary(_) => "StrategyUnnecessary",
            StreamError::OutOfBounds(_) => "OutOfBounds",
            StreamError::UnknownStream(_) => "UnknownStream",
            StreamError::InvalidArguments { .. } => "InvalidArguments",
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "kind": self.kind(), "message": self.to_string() })
    }
}

/// One entry of the append-only call log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub call_id: u64,
    /// Group of calls issued together (one model turn or one control step).
    pub burst: u64,
    /// Simulated time when the call completed.
    pub sim_time: f64,
    pub name: StreamName,
    pub args: Value,
    /// `{"ok": value}` or `{"error": {"kind", "message"}}`.
    pub result: Value,
    pub direction: StreamDirection,
    /// For maneuver sub-calls, the `avoidObstacle` call they belong to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<u64>,
}

impl StreamRecord {
    pub fn is_ok(&self) -> bool {
        self.result.get("ok").is_some()
    }

    pub fn ok_value(&self) -> Option<&Value> {
        self.result.get("ok")
    }

    pub fn error_kind(&self) -> Option<&str> {
        self.result.get("error")?.get("kind")?.as_str()
    }
}
