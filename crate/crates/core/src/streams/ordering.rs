//! Structural checks over a recorded call log.
//!
//! Within one burst, commands flow down the layers (mission control before
//! agent before environment) and observations flow back up (environment before
//! agent before mission control). Maneuver sub-calls must follow the
//! `avoidObstacle` call that produced them in the same burst.

use std::collections::HashMap;

use thiserror::Error;

use super::{Sense, StreamName, StreamRecord};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("call {call_id}: {reason}")]
pub struct OrderingViolation {
    pub call_id: u64,
    pub reason: String,
}

/// Returns the first violation in `records`, or `Ok(())`.
pub fn validate_ordering(records: &[StreamRecord]) -> Result<(), OrderingViolation> {
    let mut prev: Option<&StreamRecord> = None;
    // burst -> (last downstream layer, last upstream layer)
    let mut layers: HashMap<u64, (Option<u8>, Option<u8>)> = HashMap::new();
    let mut avoid_calls: HashMap<u64, u64> = HashMap::new();

    for r in records {
        let fail = |reason: String| Err(OrderingViolation { call_id: r.call_id, reason });
        if r.direction != r.name.direction() {
            return fail(format!("{} is tagged with the wrong direction", r.name));
        }
        if let Some(p) = prev {
            if r.call_id <= p.call_id {
                return fail(format!("call_id does not increase after {}", p.call_id));
            }
            if r.burst < p.burst {
                return fail(format!("burst {} follows burst {}", r.burst, p.burst));
            }
            if r.sim_time < p.sim_time {
                return fail(format!("sim_time {} precedes {}", r.sim_time, p.sim_time));
            }
        }
        if let Some(parent) = r.parent {
            if r.name != StreamName::ExecuteAgentManeuver {
                return fail(format!("{} cannot have a parent call", r.name));
            }
            match avoid_calls.get(&parent) {
                Some(&burst) if burst == r.burst => {}
                Some(_) => return fail(format!("parent {parent} belongs to another burst")),
                None => return fail(format!("parent {parent} is not an earlier avoidObstacle call")),
            }
        }

        let entry = layers.entry(r.burst).or_insert((None, None));
        let layer = r.direction.layer;
        match r.direction.sense {
            Sense::Downstream => {
                if let Some(last) = entry.0 {
                    if layer < last {
                        return fail(format!(
                            "downstream layer {layer} after layer {last} in burst {}",
                            r.burst
                        ));
                    }
                }
                entry.0 = Some(layer);
            }
            Sense::Upstream => {
                if let Some(last) = entry.1 {
                    if layer > last {
                        return fail(format!(
                            "upstream layer {layer} after layer {last} in burst {}",
                            r.burst
                        ));
                    }
                }
                entry.1 = Some(layer);
            }
        }
        if r.name == StreamName::AvoidObstacle {
            avoid_calls.insert(r.call_id, r.burst);
        }
        prev = Some(r);
    }
    Ok(())
}
