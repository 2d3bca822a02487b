//! Mission logs and their newline-delimited JSON form.
//!
//! A log file starts with a `header` line carrying the mission (with its world
//! inline, so a log is self-contained), then `call`, `sample`, `collision`,
//! `clearance` and `turn` lines, and ends with one `summary` line. Logs carry
//! no wall-clock data, so equal runs produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MissionSpec, WorldRef};
use crate::agent::{Pose, TrajectorySample};
use crate::llm::{ApiBudget, ChatTurn, ModelConfig};
use crate::streams::{CollisionEvent, SessionConfig, StreamRecord};
use crate::world::WorldSpec;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("malformed log: {0}")]
    MalformedLog(String),
    #[error("cannot access log file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Direct,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Reached,
    Halted,
    BudgetExhausted,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Reached => "reached",
            RunStatus::Halted => "halted",
            RunStatus::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    /// The mission, with its world inline.
    pub mission: MissionSpec,
    pub mode: RunMode,
    pub session_config: SessionConfig,
    pub model: Option<ModelConfig>,
    pub records: Vec<StreamRecord>,
    pub trajectory: Vec<TrajectorySample>,
    pub collisions: Vec<CollisionEvent>,
    pub clearance_violations: Vec<CollisionEvent>,
    pub transcript: Vec<ChatTurn>,
    pub budget: Option<ApiBudget>,
    /// Model completions used (zero in direct mode).
    pub calls_used: u32,
    pub status: RunStatus,
    pub halt_reason: Option<String>,
    pub final_pose: Pose,
    pub sim_time: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header {
        schema_version: u32,
        mission: MissionSpec,
        mode: RunMode,
        session_config: SessionConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<ModelConfig>,
    },
    Call(StreamRecord),
    Sample(TrajectorySample),
    Collision(CollisionEvent),
    Clearance(CollisionEvent),
    Turn(ChatTurn),
    Summary {
        status: RunStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        halt_reason: Option<String>,
        calls_used: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<ApiBudget>,
        final_pose: Pose,
        sim_time: f64,
    },
}

impl MissionLog {
    pub fn world(&self) -> Result<&WorldSpec, LogError> {
        match &self.mission.world {
            WorldRef::Inline(w) => Ok(w),
            WorldRef::Path(p) => Err(LogError::MalformedLog(format!("world is a path ({p}), not inline"))),
        }
    }

    pub fn to_ndjson(&self) -> String {
        let mut lines = vec![LogLine::Header {
            schema_version: LOG_SCHEMA_VERSION,
            mission: self.mission.clone(),
            mode: self.mode,
            session_config: self.session_config,
            model: self.model.clone(),
        }];
        lines.extend(self.records.iter().cloned().map(LogLine::Call));
        lines.extend(self.trajectory.iter().copied().map(LogLine::Sample));
        lines.extend(self.collisions.iter().cloned().map(LogLine::Collision));
        lines.extend(self.clearance_violations.iter().cloned().map(LogLine::Clearance));
        lines.extend(self.transcript.iter().cloned().map(LogLine::Turn));
        lines.push(LogLine::Summary {
            status: self.status,
            halt_reason: self.halt_reason.clone(),
            calls_used: self.calls_used,
            budget: self.budget.clone(),
            final_pose: self.final_pose,
            sim_time: self.sim_time,
        });
        let mut out = String::new();
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("log lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, LogError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse = |n: usize, l: &str| -> Result<LogLine, LogError> {
            serde_json::from_str(l).map_err(|e| LogError::MalformedLog(format!("line {}: {e}", n + 1)))
        };
        let (n, first) = lines.next().ok_or_else(|| LogError::MalformedLog("empty log".into()))?;
        let LogLine::Header { schema_version, mission, mode, session_config, model } = parse(n, first)? else {
            return Err(LogError::MalformedLog("first line is not a header".into()));
        };
        if schema_version != LOG_SCHEMA_VERSION {
            return Err(LogError::MalformedLog(format!("unsupported schema_version {schema_version}")));
        }
        let mut log = MissionLog {
            mission,
            mode,
            session_config,
            model,
            records: vec![],
            trajectory: vec![],
            collisions: vec![],
            clearance_violations: vec![],
            transcript: vec![],
            budget: None,
            calls_used: 0,
            status: RunStatus::Halted,
            halt_reason: None,
            final_pose: Pose::default(),
            sim_time: 0.0,
        };
        let mut summary_seen = false;
        for (n, l) in lines {
            if summary_seen {
                return Err(LogError::MalformedLog(format!("line {}: content after summary", n + 1)));
            }
            match parse(n, l)? {
                LogLine::Header { .. } => {
                    return Err(LogError::MalformedLog(format!("line {}: second header", n + 1)))
                }
                LogLine::Call(r) => log.records.push(r),
                LogLine::Sample(s) => log.trajectory.push(s),
                LogLine::Collision(c) => log.collisions.push(c),
                LogLine::Clearance(c) => log.clearance_violations.push(c),
                LogLine::Turn(t) => log.transcript.push(t),
                LogLine::Summary { status, halt_reason, calls_used, budget, final_pose, sim_time } => {
                    log.status = status;
                    log.halt_reason = halt_reason;
                    log.calls_used = calls_used;
                    log.budget = budget;
                    log.final_pose = final_pose;
                    log.sim_time = sim_time;
                    summary_seen = true;
                }
            }
        }
        if !summary_seen {
            return Err(LogError::MalformedLog("missing summary line".into()));
        }
        log.world()?;
        Ok(log)
    }

    pub fn write(&self, path: &Path) -> Result<(), LogError> {
        std::fs::write(path, self.to_ndjson()).map_err(|e| LogError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, LogError> {
        let text = std::fs::read_to_string(path).map_err(|e| LogError::Io(format!("{}: {e}", path.display())))?;
        Self::from_ndjson(&text)
    }

    /// The stream log alone, one record per line.
    pub fn records_ndjson(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}
