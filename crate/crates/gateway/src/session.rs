//! Live sessions: creation, prompt submission and the per-session executor.
//!
//! Each session owns one mission runner. A submitted prompt moves the session
//! to `awaiting_llm` and hands the runner to a worker thread, which steps the
//! model loop until the model answers in plain text (back to `idle`) or the
//! run ends (`finished`). While the worker holds the runner, further prompts
//! are refused with `Busy`, so mutations reach the runner strictly one at a
//! time and in arrival order.
//!
//! At most one unfinished session may exist per world, which keeps every
//! run deterministic for a given fixture.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use flightlink_core::llm::{
    ApiBudget, ChatTurn, HttpProvider, ModelConfig, PriceTable, Provider, ScriptedProvider, API_KEY_ENV,
};
use flightlink_core::mission::{
    run_direct_observed, LlmRunConfig, LlmRunner, LoadedMission, MissionLog, RunMode, RunObserver, RunPhase,
    RunStatus,
};
use flightlink_core::streams::{Session, SessionConfig, StreamRecord};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::UnboundedReceiver;

use crate::error::GatewayError;
use crate::telemetry::{SessionState, Snapshot, TelemetryHub, TelemetryMessage, Update};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Scripted,
    Http,
}

/// Body of a create-session request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub mission_id: String,
    pub mode: RunMode,
    #[serde(default)]
    pub provider: ProviderKind,
    /// Name of a script in the gateway's script directory; defaults to the
    /// mission id.
    #[serde(default)]
    pub fixture: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub call_limit: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub mission_id: String,
    pub mode: RunMode,
    pub state: SessionState,
}

/// Where providers come from and how runs are configured.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub missions: Vec<LoadedMission>,
    /// Directory holding `<name>.json` scripted-provider fixtures.
    pub scripts_dir: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible endpoint for the HTTP provider.
    pub http_base_url: Option<String>,
    pub http_timeout: Duration,
    pub price_table: PriceTable,
    pub session: SessionConfig,
}

impl GatewayConfig {
    pub fn new(missions: Vec<LoadedMission>) -> Self {
        Self {
            missions,
            scripts_dir: None,
            http_base_url: None,
            http_timeout: Duration::from_secs(60),
            price_table: PriceTable::default(),
            session: SessionConfig::default(),
        }
    }
}

enum Engine {
    Llm { runner: Box<LlmRunner>, started: bool },
    Direct,
}

struct Slot {
    handle: SessionHandle,
    world_key: String,
    mission: LoadedMission,
    /// `None` while a worker owns the engine.
    engine: Option<Engine>,
    provider: Option<Box<dyn Provider>>,
    run_config: LlmRunConfig,
    log: Option<MissionLog>,
    hub: Arc<TelemetryHub>,
}

impl Slot {
    /// The handle with the live state from telemetry while a worker runs.
    fn reported_handle(&self) -> SessionHandle {
        let mut h = self.handle.clone();
        if self.engine.is_none() {
            h.state = self.hub.vitals().state;
        }
        h
    }
}

/// Status document returned by the status endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    #[serde(flatten)]
    pub handle: SessionHandle,
    pub sim_time: f64,
    pub calls_used: u32,
    pub call_limit: u32,
    pub accrued_cost: f64,
    pub collision_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<RunStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt_reason: Option<String>,
}

#[derive(Default)]
struct Registry {
    next_id: u64,
    sessions: BTreeMap<String, Arc<Mutex<Slot>>>,
    /// world key -> session id of the unfinished session using it.
    world_locks: BTreeMap<String, String>,
}

#[derive(Clone)]
pub struct SessionManager {
    config: Arc<GatewayConfig>,
    registry: Arc<Mutex<Registry>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn world_key(m: &LoadedMission) -> String {
    match &m.world_path {
        Some(p) => format!("file:{}", std::fs::canonicalize(p).unwrap_or_else(|_| p.clone()).display()),
        None => format!("inline:{}", m.spec.id),
    }
}

fn fixture_name_ok(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && !name.starts_with('.')
}

impl SessionManager {
    pub fn new(config: GatewayConfig) -> Self {
        Self { config: Arc::new(config), registry: Arc::new(Mutex::new(Registry::default())) }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn missions(&self) -> &[LoadedMission] {
        &self.config.missions
    }

    pub fn mission(&self, id: &str) -> Result<&LoadedMission, GatewayError> {
        self.config
            .missions
            .iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| GatewayError::MissionNotFound(id.to_string()))
    }

    fn provider_for(&self, req: &CreateSession) -> Result<Box<dyn Provider>, GatewayError> {
        match req.provider {
            ProviderKind::Scripted => {
                let name = req.fixture.clone().unwrap_or_else(|| req.mission_id.clone());
                if !fixture_name_ok(&name) {
                    return Err(GatewayError::InvalidRequest(format!("invalid fixture name `{name}`")));
                }
                let dir = self
                    .config
                    .scripts_dir
                    .as_ref()
                    .ok_or_else(|| GatewayError::InvalidRequest("no script directory configured".into()))?;
                let path = dir.join(format!("{name}.json"));
                let provider = ScriptedProvider::load(&path)
                    .map_err(|e| GatewayError::InvalidRequest(format!("fixture `{name}`: {e}")))?;
                Ok(Box::new(provider))
            }
            ProviderKind::Http => {
                let base = self
                    .config
                    .http_base_url
                    .as_deref()
                    .ok_or_else(|| GatewayError::InvalidRequest("no HTTP provider endpoint configured".into()))?;
                let key = std::env::var(API_KEY_ENV)
                    .map_err(|_| GatewayError::InvalidRequest(format!("{API_KEY_ENV} is not set")))?;
                Ok(Box::new(HttpProvider::new(base, &key, self.config.http_timeout)))
            }
        }
    }

    /// Creates a session in state `idle`.
    pub fn create_session(&self, req: CreateSession) -> Result<SessionHandle, GatewayError> {
        let mut mission = self.mission(&req.mission_id)?.clone();
        if let Some(limit) = req.call_limit {
            if limit == 0 {
                return Err(GatewayError::InvalidRequest("call_limit must be at least 1".into()));
            }
            mission.spec.call_limit = limit;
        }
        let mut run_config = LlmRunConfig {
            price_table: self.config.price_table.clone(),
            session: self.config.session,
            await_operator: true,
            ..LlmRunConfig::default()
        };
        if let Some(model) = &req.model {
            run_config.model = ModelConfig::new(model);
        }
        let (engine, provider) = match req.mode {
            RunMode::Llm => {
                let provider = self.provider_for(&req)?;
                // The first operator prompt replaces this placeholder runner.
                let runner = LlmRunner::new(mission.clone(), run_config.clone())
                    .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
                (Engine::Llm { runner: Box::new(runner), started: false }, Some(provider))
            }
            RunMode::Direct => (Engine::Direct, None),
        };

        let key = world_key(&mission);
        let mut reg = lock(&self.registry);
        if let Some(holder) = reg.world_locks.get(&key) {
            return Err(GatewayError::Conflict(format!("session {holder} is already flying in this world")));
        }
        reg.next_id += 1;
        let session_id = format!("s{}", reg.next_id);
        let handle = SessionHandle {
            session_id: session_id.clone(),
            mission_id: mission.id().to_string(),
            mode: req.mode,
            state: SessionState::Idle,
        };
        let inline = LoadedMission::inline(mission.spec.clone(), mission.world.clone())
            .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        let hub = Arc::new(TelemetryHub::new(&session_id, inline.spec, mission.spec.call_limit));
        let slot = Slot {
            handle: handle.clone(),
            world_key: key.clone(),
            mission,
            engine: Some(engine),
            provider,
            run_config,
            log: None,
            hub,
        };
        reg.world_locks.insert(key, session_id.clone());
        reg.sessions.insert(session_id, Arc::new(Mutex::new(slot)));
        Ok(handle)
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, GatewayError> {
        lock(&self.registry).sessions.get(id).cloned().ok_or_else(|| GatewayError::SessionNotFound(id.to_string()))
    }

    pub fn sessions(&self) -> Vec<SessionHandle> {
        let slots: Vec<_> = lock(&self.registry).sessions.values().cloned().collect();
        slots.iter().map(|s| lock(s).reported_handle()).collect()
    }

    pub fn handle(&self, id: &str) -> Result<SessionHandle, GatewayError> {
        let slot = self.slot(id)?;
        let out = lock(&slot).reported_handle();
        Ok(out)
    }

    pub fn status(&self, id: &str) -> Result<SessionStatus, GatewayError> {
        let slot = self.slot(id)?;
        let slot = lock(&slot);
        let snap = slot.hub.snapshot();
        Ok(SessionStatus {
            handle: slot.reported_handle(),
            sim_time: snap.vitals.sim_time,
            calls_used: snap.vitals.calls_used,
            call_limit: snap.vitals.call_limit,
            accrued_cost: snap.vitals.accrued_cost,
            collision_count: snap.vitals.collision_count,
            status: snap.status,
            halt_reason: snap.halt_reason,
        })
    }

    pub fn subscribe(&self, id: &str) -> Result<UnboundedReceiver<TelemetryMessage>, GatewayError> {
        let slot = self.slot(id)?;
        let out = lock(&slot).hub.subscribe();
        Ok(out)
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, GatewayError> {
        let slot = self.slot(id)?;
        let out = lock(&slot).hub.snapshot();
        Ok(out)
    }

    /// The mission log: final once finished, partial while idle.
    pub fn log(&self, id: &str) -> Result<MissionLog, GatewayError> {
        let slot = self.slot(id)?;
        let slot = lock(&slot);
        if let Some(log) = &slot.log {
            return Ok(log.clone());
        }
        match &slot.engine {
            Some(Engine::Llm { runner, started: true }) => Ok(runner.to_log()),
            Some(_) => Err(GatewayError::InvalidRequest("the session has not run yet".into())),
            None => Err(GatewayError::Busy),
        }
    }

    /// Appends `text` as an operator turn and resumes the model loop on a
    /// worker thread. Returns once the prompt is accepted.
    pub fn submit_prompt(&self, id: &str, text: &str) -> Result<SessionHandle, GatewayError> {
        let slot_arc = self.slot(id)?;
        let mut slot = lock(&slot_arc);
        if slot.handle.mode != RunMode::Llm {
            return Err(GatewayError::WrongMode("direct-mode sessions start with the run endpoint".into()));
        }
        if let Some(Engine::Llm { runner, .. }) = &slot.engine {
            let b = runner.budget();
            if b.calls_used >= b.call_limit || runner.status() == Some(RunStatus::BudgetExhausted) {
                return Err(GatewayError::BudgetExceeded { used: b.calls_used, limit: b.call_limit });
            }
        }
        match slot.handle.state {
            SessionState::AwaitingLlm | SessionState::Executing => return Err(GatewayError::Busy),
            SessionState::Finished => return Err(GatewayError::SessionFinished),
            SessionState::Idle => {}
        }
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompt text is empty".into()));
        }
        let Some(Engine::Llm { mut runner, started }) = slot.engine.take() else {
            return Err(GatewayError::Busy);
        };
        if started {
            runner.push_user(text);
        } else {
            runner = Box::new(
                LlmRunner::with_prompt(slot.mission.clone(), slot.run_config.clone(), text)
                    .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?,
            );
        }
        let mut provider = slot.provider.take().expect("provider present while idle");
        slot.handle.state = SessionState::AwaitingLlm;
        let handle = slot.handle.clone();
        let hub = slot.hub.clone();
        hub.publish(Update { state: Some(SessionState::AwaitingLlm), ..Update::default() });
        drop(slot);

        let manager = self.clone();
        let id = id.to_string();
        let seen_turns = if started { runner.transcript().len() - 1 } else { 0 };
        std::thread::spawn(move || {
            let mut obs = HubObserver::new(&hub, runner.session());
            obs.publish_turns(runner.transcript(), seen_turns);
            let mut seen = runner.transcript().len();
            loop {
                let status = runner.step(provider.as_mut(), &mut obs);
                obs.publish_turns(runner.transcript(), seen);
                seen = runner.transcript().len();
                obs.publish_budget(runner.budget());
                if status.is_some() || runner.awaiting_operator() {
                    break;
                }
            }
            let log = runner.is_finished().then(|| runner.to_log());
            manager.settle(&id, Engine::Llm { runner, started: true }, Some(provider), log);
        });
        Ok(handle)
    }

    /// Flies a direct-mode session to the end on a worker thread.
    pub fn start_direct(&self, id: &str) -> Result<SessionHandle, GatewayError> {
        let slot_arc = self.slot(id)?;
        let mut slot = lock(&slot_arc);
        if slot.handle.mode != RunMode::Direct {
            return Err(GatewayError::WrongMode("model-driven sessions start with a prompt".into()));
        }
        match slot.handle.state {
            SessionState::Idle => {}
            SessionState::Finished => return Err(GatewayError::SessionFinished),
            _ => return Err(GatewayError::Busy),
        }
        let engine = slot.engine.take().ok_or(GatewayError::Busy)?;
        slot.handle.state = SessionState::Executing;
        let handle = slot.handle.clone();
        let hub = slot.hub.clone();
        hub.publish(Update { state: Some(SessionState::Executing), ..Update::default() });
        let mission = slot.mission.clone();
        let config = slot.run_config.session;
        drop(slot);

        let manager = self.clone();
        let id = id.to_string();
        std::thread::spawn(move || {
            let mut obs = HubObserver { hub: &hub, samples_seen: 0 };
            let log = match run_direct_observed(&mission, config, &mut obs) {
                Ok(log) => Ok(log),
                Err(e) => Err(e.to_string()),
            };
            manager.settle_direct(&id, engine, log);
        });
        Ok(handle)
    }

    /// Returns the engine after a worker pass and updates the state.
    fn settle(&self, id: &str, engine: Engine, provider: Option<Box<dyn Provider>>, log: Option<MissionLog>) {
        let Ok(slot_arc) = self.slot(id) else { return };
        let mut slot = lock(&slot_arc);
        slot.engine = Some(engine);
        slot.provider = provider;
        match log {
            Some(log) => {
                let (status, reason) = (log.status, log.halt_reason.clone());
                slot.log = Some(log);
                self.finish_slot(&mut slot, Some(status), reason);
            }
            None => {
                slot.handle.state = SessionState::Idle;
                slot.hub.publish(Update { state: Some(SessionState::Idle), ..Update::default() });
            }
        }
    }

    fn settle_direct(&self, id: &str, engine: Engine, log: Result<MissionLog, String>) {
        let Ok(slot_arc) = self.slot(id) else { return };
        let mut slot = lock(&slot_arc);
        slot.engine = Some(engine);
        match log {
            Ok(log) => {
                let (status, reason) = (log.status, log.halt_reason.clone());
                slot.log = Some(log);
                self.finish_slot(&mut slot, Some(status), reason);
            }
            Err(reason) => self.finish_slot(&mut slot, Some(RunStatus::Halted), Some(reason)),
        }
    }

    fn finish_slot(&self, slot: &mut Slot, status: Option<RunStatus>, reason: Option<String>) {
        slot.handle.state = SessionState::Finished;
        slot.hub.finish(status, reason);
        let mut reg = lock(&self.registry);
        if reg.world_locks.get(&slot.world_key) == Some(&slot.handle.session_id) {
            reg.world_locks.remove(&slot.world_key);
        }
    }
}

/// Turns runner callbacks into telemetry frames.
struct HubObserver<'a> {
    hub: &'a TelemetryHub,
    samples_seen: usize,
}

impl<'a> HubObserver<'a> {
    fn new(hub: &'a TelemetryHub, session: &Session) -> Self {
        Self { hub, samples_seen: session.trajectory().len() }
    }

    fn publish_turns(&self, transcript: &[ChatTurn], from: usize) {
        if transcript.len() > from {
            self.hub.publish(Update { turns: transcript[from..].to_vec(), ..Update::default() });
        }
    }

    fn publish_budget(&self, budget: &ApiBudget) {
        let v = self.hub.vitals();
        if v.calls_used != budget.calls_used || v.accrued_cost != budget.accrued_cost {
            self.hub.publish(Update {
                calls_used: Some(budget.calls_used),
                accrued_cost: Some(budget.accrued_cost),
                ..Update::default()
            });
        }
    }
}

impl RunObserver for HubObserver<'_> {
    fn phase(&mut self, phase: RunPhase) {
        let state = match phase {
            RunPhase::AwaitingLlm => SessionState::AwaitingLlm,
            RunPhase::Executing => SessionState::Executing,
        };
        if self.hub.vitals().state != state {
            self.hub.publish(Update { state: Some(state), ..Update::default() });
        }
    }

    fn record(&mut self, record: &StreamRecord, session: &Session, budget: Option<&ApiBudget>) {
        let samples = session.trajectory()[self.samples_seen.min(session.trajectory().len())..].to_vec();
        self.samples_seen = session.trajectory().len();
        self.hub.publish(Update {
            sim_time: Some(session.sim_time()),
            pose: Some(session.pose()),
            calls_used: budget.map(|b| b.calls_used),
            accrued_cost: budget.map(|b| b.accrued_cost),
            collision_count: Some(session.collisions().len()),
            last_call: Some(record.clone()),
            samples,
            ..Update::default()
        });
    }
}
