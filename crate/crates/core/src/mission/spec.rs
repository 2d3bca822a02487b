//! Declarative mission files and their loaded form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::planner::Strategy;
use crate::world::{WorldError, WorldSpec};

pub const MISSION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissionError {
    #[error("mission file is invalid: {0}")]
    Invalid(String),
    #[error("world file is invalid: {0}")]
    WorldFileInvalid(#[from] WorldError),
}

/// Which avoidance maneuvers a mission admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyConstraint {
    #[default]
    Any,
    AltitudeOnly,
    Circumnavigate,
}

impl StrategyConstraint {
    pub fn allows(self, strategy: Strategy) -> bool {
        match self {
            StrategyConstraint::Any => true,
            StrategyConstraint::AltitudeOnly => strategy == Strategy::Altitude,
            StrategyConstraint::Circumnavigate => strategy == Strategy::Circumnavigate,
        }
    }
}

/// Either a path to a world file (relative to the mission file) or the world inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorldRef {
    Path(String),
    Inline(WorldSpec),
}

fn mission_schema_version() -> u32 {
    MISSION_SCHEMA_VERSION
}
fn default_call_limit() -> u32 {
    10
}
fn default_goal_tolerance() -> f64 {
    0.5
}
fn default_margin() -> f64 {
    0.5
}
fn default_timeout() -> f64 {
    600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    #[serde(default = "mission_schema_version")]
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub world: WorldRef,
    pub start: Vec3,
    pub goal: Vec3,
    #[serde(default)]
    pub strategy: StrategyConstraint,
    /// Sentences appended verbatim to the system prompt.
    #[serde(default)]
    pub prompt_constraints: Vec<String>,
    /// Upper bound on obstacle height stated to the operator, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_bound: Option<f64>,
    #[serde(default = "default_call_limit")]
    pub call_limit: u32,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Simulated seconds after which a run is halted.
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// First user message in LLM mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_prompt: Option<String>,
}

impl MissionSpec {
    pub fn operator_prompt(&self) -> String {
        self.operator_prompt.clone().unwrap_or_else(|| {
            format!(
                "Start mission {} and fly the UAV from {} to {} without touching any obstacle.",
                self.id, self.start, self.goal
            )
        })
    }
}

/// A mission with its world resolved and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMission {
    pub spec: MissionSpec,
    pub world: WorldSpec,
    /// Where the world was read from; `senseEnvironment` re-reads it.
    pub world_path: Option<PathBuf>,
}

impl LoadedMission {
    pub fn load(path: &Path) -> Result<Self, MissionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MissionError::Invalid(format!("{}: {e}", path.display())))?;
        let spec: MissionSpec =
            serde_json::from_str(&text).map_err(|e| MissionError::Invalid(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::resolve(spec, base)
    }

    /// Resolves a relative world path against `base`.
    pub fn resolve(spec: MissionSpec, base: &Path) -> Result<Self, MissionError> {
        let (world, world_path) = match &spec.world {
            WorldRef::Inline(w) => {
                w.validate()?;
                (w.clone(), None)
            }
            WorldRef::Path(p) => {
                let full = base.join(p);
                (WorldSpec::load(&full)?, Some(full))
            }
        };
        let loaded = LoadedMission { spec, world, world_path };
        loaded.validate()?;
        Ok(loaded)
    }

    /// A mission whose world is carried inline, as stored in logs.
    pub fn inline(mut spec: MissionSpec, world: WorldSpec) -> Result<Self, MissionError> {
        world.validate()?;
        spec.world = WorldRef::Inline(world.clone());
        let loaded = LoadedMission { spec, world, world_path: None };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        let s = &self.spec;
        let invalid = |m: String| Err(MissionError::Invalid(m));
        if s.schema_version != MISSION_SCHEMA_VERSION {
            return invalid(format!("unsupported schema_version {}", s.schema_version));
        }
        if s.id.is_empty() {
            return invalid("mission id is empty".into());
        }
        if !s.start.is_finite() || !s.goal.is_finite() {
            return invalid("start and goal must be finite".into());
        }
        if s.start == s.goal {
            return invalid("start and goal coincide".into());
        }
        for (name, p) in [("start", s.start), ("goal", s.goal)] {
            if !self.world.extent.contains(p) {
                return invalid(format!("{name} {p} is outside the world extent"));
            }
        }
        if s.call_limit < 1 {
            return invalid("call_limit must be at least 1".into());
        }
        if !(s.goal_tolerance > 0.0 && s.margin >= 0.0 && s.timeout_s > 0.0) {
            return invalid("goal_tolerance and timeout must be positive, margin non-negative".into());
        }
        if let Some(b) = s.height_bound {
            if !(b.is_finite() && b > 0.0) {
                return invalid("height_bound must be positive".into());
            }
        }
        Ok(())
    }
}
