//! Re-execution of a recorded log against a fresh session.

use thiserror::Error;

use super::log::{LogError, MissionLog};
use super::LoadedMission;
use crate::streams::Session;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("replay diverged at call {call_id}: {reason}")]
    ReplayDivergence { call_id: u64, reason: String },
}

/// Re-runs every recorded call, in order, without any provider. The result
/// equals the input field for field unless the simulation is
/// nondeterministic or the log was altered.
pub fn replay(log: &MissionLog) -> Result<MissionLog, ReplayError> {
    let world = log.world()?.clone();
    let mission = LoadedMission::inline(log.mission.clone(), world)
        .map_err(|e| LogError::MalformedLog(e.to_string()))?;
    let mut session = Session::new([mission], log.session_config);
    let diverge = |call_id: u64, reason: String| ReplayError::ReplayDivergence { call_id, reason };

    for r in &log.records {
        if r.burst < session.burst() {
            return Err(diverge(r.call_id, format!("burst {} after burst {}", r.burst, session.burst())));
        }
        while session.burst() < r.burst {
            session.begin_burst();
        }
        let before = session.records().len();
        let _ = session.invoke(r.name.as_str(), &r.args);
        let got = session.records().get(before).ok_or_else(|| {
            diverge(r.call_id, "the call was rejected before execution".into())
        })?;
        if got != r {
            let field = if got.call_id != r.call_id {
                "call_id"
            } else if got.result != r.result {
                "result"
            } else if got.sim_time != r.sim_time {
                "sim_time"
            } else if got.parent != r.parent {
                "parent"
            } else {
                "record"
            };
            return Err(diverge(r.call_id, format!("{field} differs from the recorded value")));
        }
    }

    let last = log.records.last().map_or(0, |r| r.call_id);
    let check = |same: bool, what: &str| if same { Ok(()) } else { Err(diverge(last, format!("{what} differs"))) };
    check(session.trajectory() == log.trajectory.as_slice(), "trajectory")?;
    check(session.collisions() == log.collisions.as_slice(), "collision events")?;
    check(session.clearance_violations() == log.clearance_violations.as_slice(), "clearance events")?;
    check(session.pose() == log.final_pose, "final pose")?;
    check(session.sim_time() == log.sim_time, "sim time")?;

    Ok(MissionLog {
        records: session.records().to_vec(),
        trajectory: session.trajectory().to_vec(),
        collisions: session.collisions().to_vec(),
        clearance_violations: session.clearance_violations().to_vec(),
        final_pose: session.pose(),
        sim_time: session.sim_time(),
        ..log.clone()
    })
}
