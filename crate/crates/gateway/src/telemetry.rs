//! Per-session telemetry fan-out.
//!
//! The hub keeps the accumulated view of a session (trajectory, transcript,
//! counters) next to the subscriber list, under one lock. Publishing a frame
//! and subscribing are therefore atomic with respect to each other: a new
//! subscriber gets a snapshot that already contains every frame up to its
//! `seq`, then every later frame, with no gaps and no duplicates.
//!
//! Wire messages are JSON objects tagged by `"type"`:
//! `snapshot` (first message on every subscription), `frame`, and
//! `finished` (end-of-stream marker, not numbered).

use std::sync::Mutex;

use flightlink_core::agent::{Pose, TrajectorySample};
use flightlink_core::llm::ChatTurn;
use flightlink_core::mission::{MissionSpec, RunStatus};
use flightlink_core::streams::StreamRecord;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};

/// Version of the telemetry message format.
pub const TELEMETRY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    AwaitingLlm,
    Executing,
    Finished,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Idle => "idle",
            SessionState::AwaitingLlm => "awaiting_llm",
            SessionState::Executing => "executing",
            SessionState::Finished => "finished",
        }
    }
}

/// Counters carried by every frame and snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vitals {
    pub state: SessionState,
    pub sim_time: f64,
    pub pose: Pose,
    pub calls_used: u32,
    pub call_limit: u32,
    pub accrued_cost: f64,
    pub collision_count: usize,
}

/// An incremental update. `samples` and `turns` hold only what is new since
/// the previous frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub seq: u64,
    #[serde(flatten)]
    pub vitals: Vitals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_call: Option<StreamRecord>,
    #[serde(default)]
    pub samples: Vec<TrajectorySample>,
    #[serde(default)]
    pub turns: Vec<ChatTurn>,
}

/// Everything a client needs to draw the session from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    /// Sequence number of the last frame folded into this snapshot; the next
    /// frame the subscriber sees is `seq + 1`.
    pub seq: u64,
    pub session_id: String,
    /// The mission with its world inline.
    pub mission: MissionSpec,
    #[serde(flatten)]
    pub vitals: Vitals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_call: Option<StreamRecord>,
    pub trajectory: Vec<TrajectorySample>,
    pub transcript: Vec<ChatTurn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<RunStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TelemetryMessage {
    Snapshot(Box<Snapshot>),
    Frame(Box<TelemetryFrame>),
    Finished {
        last_seq: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        status: Option<RunStatus>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        halt_reason: Option<String>,
    },
}

/// A change to publish; fields left `None`/empty are unchanged.
#[derive(Debug, Default, Clone)]
pub struct Update {
    pub state: Option<SessionState>,
    pub sim_time: Option<f64>,
    pub pose: Option<Pose>,
    pub calls_used: Option<u32>,
    pub accrued_cost: Option<f64>,
    pub collision_count: Option<usize>,
    pub last_call: Option<StreamRecord>,
    pub samples: Vec<TrajectorySample>,
    pub turns: Vec<ChatTurn>,
}

struct HubInner {
    seq: u64,
    view: Snapshot,
    finished: bool,
    subscribers: Vec<UnboundedSender<TelemetryMessage>>,
}

pub struct TelemetryHub {
    inner: Mutex<HubInner>,
}

impl TelemetryHub {
    pub fn new(session_id: &str, mission: MissionSpec, call_limit: u32) -> Self {
        let vitals = Vitals {
            state: SessionState::Idle,
            sim_time: 0.0,
            pose: Pose::at(mission.start),
            calls_used: 0,
            call_limit,
            accrued_cost: 0.0,
            collision_count: 0,
        };
        let view = Snapshot {
            schema_version: TELEMETRY_SCHEMA_VERSION,
            seq: 0,
            session_id: session_id.to_string(),
            mission,
            vitals,
            last_call: None,
            trajectory: vec![],
            transcript: vec![],
            status: None,
            halt_reason: None,
        };
        Self { inner: Mutex::new(HubInner { seq: 0, view, finished: false, subscribers: vec![] }) }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HubInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Registers a subscriber. The receiver yields a snapshot first; for a
    /// finished session the finished marker follows immediately.
    pub fn subscribe(&self) -> UnboundedReceiver<TelemetryMessage> {
        let (tx, rx) = unbounded_channel();
        let mut inner = self.lock();
        let mut snap = inner.view.clone();
        snap.seq = inner.seq;
        let _ = tx.send(TelemetryMessage::Snapshot(Box::new(snap)));
        if inner.finished {
            let _ = tx.send(finished_marker(&inner));
        } else {
            inner.subscribers.push(tx);
        }
        rx
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.lock();
        let mut snap = inner.view.clone();
        snap.seq = inner.seq;
        snap
    }

    pub fn vitals(&self) -> Vitals {
        self.lock().view.vitals.clone()
    }

    /// Folds `update` into the view and sends it to every subscriber as the
    /// next frame. Returns the frame's sequence number; updates after the
    /// session finished are dropped.
    pub fn publish(&self, update: Update) -> Option<u64> {
        let mut inner = self.lock();
        if inner.finished {
            return None;
        }
        inner.seq += 1;
        let seq = inner.seq;
        let v = &mut inner.view;
        let vit = &mut v.vitals;
        if let Some(s) = update.state {
            vit.state = s;
        }
        if let Some(t) = update.sim_time {
            // Frames never move the clock backwards.
            vit.sim_time = vit.sim_time.max(t);
        }
        if let Some(p) = update.pose {
            vit.pose = p;
        }
        if let Some(c) = update.calls_used {
            vit.calls_used = c;
        }
        if let Some(c) = update.accrued_cost {
            vit.accrued_cost = c;
        }
        if let Some(c) = update.collision_count {
            vit.collision_count = c;
        }
        if update.last_call.is_some() {
            v.last_call = update.last_call.clone();
        }
        v.trajectory.extend_from_slice(&update.samples);
        v.transcript.extend_from_slice(&update.turns);
        let frame = TelemetryFrame {
            seq,
            vitals: v.vitals.clone(),
            last_call: update.last_call,
            samples: update.samples,
            turns: update.turns,
        };
        let msg = TelemetryMessage::Frame(Box::new(frame));
        inner.subscribers.retain(|tx| tx.send(msg.clone()).is_ok());
        Some(seq)
    }

    /// Publishes a final frame in state `finished`, then the end marker,
    /// and closes every subscription.
    pub fn finish(&self, status: Option<RunStatus>, halt_reason: Option<String>) {
        self.publish(Update { state: Some(SessionState::Finished), ..Update::default() });
        let mut inner = self.lock();
        if inner.finished {
            return;
        }
        inner.finished = true;
        inner.view.status = status;
        inner.view.halt_reason = halt_reason;
        let marker = finished_marker(&inner);
        for tx in inner.subscribers.drain(..) {
            let _ = tx.send(marker.clone());
        }
    }

    pub fn is_finished(&self) -> bool {
        self.lock().finished
    }
}

fn finished_marker(inner: &HubInner) -> TelemetryMessage {
    TelemetryMessage::Finished {
        last_seq: inner.seq,
        status: inner.view.status,
        halt_reason: inner.view.halt_reason.clone(),
    }
}
