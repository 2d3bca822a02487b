//! Mission definitions and the two execution loops: direct control, where a
//! fixed program issues the stream calls, and model-in-the-loop control.
//! Both produce a [`MissionLog`] that [`evaluate`] scores and [`replay`]
//! re-executes.

mod direct;
mod evaluate;
mod fixtures;
mod log;
mod replay;
mod runner;
mod spec;

pub use direct::{first_blocking, run_direct, run_direct_observed, RunError, MAX_DIRECT_STEPS};
pub use evaluate::{evaluate, Metrics};
pub use fixtures::{script_from_log, with_malformed_first_turn};
pub use log::{LogError, MissionLog, RunMode, RunStatus, LOG_SCHEMA_VERSION};
pub use replay::{replay, ReplayError};
pub use runner::{run_llm, LlmRunConfig, LlmRunner, NoopObserver, RunObserver, RunPhase, MAX_MALFORMED_STREAK};
pub use spec::{
    LoadedMission, MissionError, MissionSpec, StrategyConstraint, WorldRef, MISSION_SCHEMA_VERSION,
};
