//! The model-in-the-loop execution: ask the provider for a turn, run its tool
//! calls through the session, feed the results back, repeat.
//!
//! [`LlmRunner`] advances one model turn per [`LlmRunner::step`], so a service
//! can interleave operator prompts and observe progress; [`run_llm`] drives it
//! to the end.

use serde_json::json;

use super::direct::RunError;
use super::log::{MissionLog, RunMode, RunStatus};
use super::LoadedMission;
use crate::llm::{
    build_system_prompt_with, complete, ApiBudget, ChatTurn, LlmError, ModelConfig, PriceTable, Provider, Role,
    DEFAULT_COMPLETION_MARKER,
};
use crate::streams::{all_schemas, Session, SessionConfig, StreamRecord, ToolSchema};

/// Consecutive malformed turns after which the run halts (one retry).
pub const MAX_MALFORMED_STREAK: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRunConfig {
    pub model: ModelConfig,
    pub price_table: PriceTable,
    pub completion_marker: String,
    pub session: SessionConfig,
    /// When set, a text-only turn without the completion marker pauses the
    /// run for an operator message instead of appending an automatic nudge.
    pub await_operator: bool,
}

impl Default for LlmRunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            price_table: PriceTable::default(),
            completion_marker: DEFAULT_COMPLETION_MARKER.into(),
            session: SessionConfig::default(),
            await_operator: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunPhase {
    AwaitingLlm,
    Executing,
}

/// Hooks for live progress reporting.
pub trait RunObserver {
    fn phase(&mut self, _phase: RunPhase) {}
    /// Called once per logged stream call. `budget` is absent for direct runs.
    fn record(&mut self, _record: &StreamRecord, _session: &Session, _budget: Option<&ApiBudget>) {}
}

pub struct NoopObserver;

impl RunObserver for NoopObserver {}

pub struct LlmRunner {
    mission: LoadedMission,
    config: LlmRunConfig,
    tools: Vec<ToolSchema>,
    session: Session,
    transcript: Vec<ChatTurn>,
    budget: ApiBudget,
    status: Option<RunStatus>,
    halt_reason: Option<String>,
    malformed_streak: u32,
}

impl LlmRunner {
    /// Seeds the conversation with the system prompt and the mission's
    /// operator prompt.
    pub fn new(mission: LoadedMission, config: LlmRunConfig) -> Result<Self, RunError> {
        let prompt = mission.spec.operator_prompt();
        Self::with_prompt(mission, config, &prompt)
    }

    /// Like [`LlmRunner::new`] with `prompt` as the first user turn.
    pub fn with_prompt(mission: LoadedMission, config: LlmRunConfig, prompt: &str) -> Result<Self, RunError> {
        config.model.validate()?;
        if config.price_table.get(&config.model.model_name).is_none() {
            return Err(LlmError::UnknownModel(config.model.model_name.clone()).into());
        }
        let system = config.model.system_prompt.clone().unwrap_or_else(|| {
            build_system_prompt_with(&mission, &mission.spec.prompt_constraints, &config.completion_marker)
        });
        let transcript = vec![ChatTurn::system(system), ChatTurn::user(prompt)];
        let budget = ApiBudget::new(mission.spec.call_limit, config.price_table.clone());
        let session = Session::new([mission.clone()], config.session);
        Ok(Self {
            mission,
            config,
            tools: all_schemas(),
            session,
            transcript,
            budget,
            status: None,
            halt_reason: None,
            malformed_streak: 0,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn budget(&self) -> &ApiBudget {
        &self.budget
    }

    pub fn transcript(&self) -> &[ChatTurn] {
        &self.transcript
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.status
    }

    pub fn is_finished(&self) -> bool {
        self.status.is_some()
    }

    /// True when the last model turn was plain text and the run is paused
    /// for the operator (only with [`LlmRunConfig::await_operator`]).
    pub fn awaiting_operator(&self) -> bool {
        self.status.is_none()
            && self.transcript.last().is_some_and(|t| t.role == Role::Assistant && t.tool_calls.is_empty())
    }

    pub fn call_limit(&self) -> u32 {
        self.budget.call_limit
    }

    /// Adds an operator message; it is seen by the next model turn.
    pub fn push_user(&mut self, text: &str) {
        self.transcript.push(ChatTurn::user(text));
    }

    /// Stops the run without contacting the provider again.
    pub fn halt(&mut self, reason: &str) {
        if self.status.is_none() {
            self.finish(RunStatus::Halted, Some(reason.to_string()));
        }
    }

    fn finish(&mut self, status: RunStatus, reason: Option<String>) {
        self.status = Some(status);
        self.halt_reason = reason;
        self.session.finish_mission();
    }

    fn at_goal(&self) -> bool {
        let spec = &self.mission.spec;
        self.session.trajectory().last().is_some_and(|s| s.pose.position.distance(spec.goal) <= spec.goal_tolerance)
    }

    /// Requests one model turn and executes its tool calls.
    pub fn step(&mut self, provider: &mut dyn Provider, observer: &mut dyn RunObserver) -> Option<RunStatus> {
        if self.status.is_some() {
            return self.status;
        }
        if self.session.sim_time() > self.mission.spec.timeout_s {
            let reason = format!("sim time {} s exceeded the {} s timeout", self.session.sim_time(), self.mission.spec.timeout_s);
            self.finish(RunStatus::Halted, Some(reason));
            return self.status;
        }
        observer.phase(RunPhase::AwaitingLlm);
        match complete(provider, &self.transcript, &self.tools, &self.config.model, &mut self.budget) {
            Err(LlmError::BudgetExceeded { .. }) => {
                self.finish(RunStatus::BudgetExhausted, Some("call budget exhausted".into()));
            }
            Err(LlmError::MalformedToolCall { turn, .. }) => {
                // Answer every call of the rejected turn, then let the model retry once.
                let calls = turn.tool_calls.clone();
                self.transcript.push(*turn);
                for call in &calls {
                    let check = self
                        .tools
                        .iter()
                        .find(|t| t.name == call.name)
                        .map(|t| t.validate_args(&call.arguments).map_err(|e| e.to_string()))
                        .unwrap_or_else(|| Err(format!("unknown tool `{}`", call.name)));
                    let content = match check {
                        Err(reason) => json!({ "error": { "kind": "MalformedToolCall", "message": reason } }),
                        Ok(()) => json!({ "error": {
                            "kind": "NotExecuted",
                            "message": "not executed because another call in the same turn was malformed"
                        } }),
                    };
                    self.transcript.push(ChatTurn::tool(call.id.clone(), content.to_string()));
                }
                self.malformed_streak += 1;
                if self.malformed_streak >= MAX_MALFORMED_STREAK {
                    self.finish(RunStatus::Halted, Some("malformed tool calls on two consecutive turns".into()));
                }
            }
            Err(e) => self.finish(RunStatus::Halted, Some(e.to_string())),
            Ok(turn) => {
                self.malformed_streak = 0;
                let calls = turn.tool_calls.clone();
                let declared_done = calls.is_empty() && turn.content.contains(&self.config.completion_marker);
                self.transcript.push(turn);
                if declared_done {
                    if self.at_goal() {
                        self.finish(RunStatus::Reached, None);
                    } else {
                        self.finish(RunStatus::Halted, Some("model declared completion away from the goal".into()));
                    }
                } else if calls.is_empty() {
                    if self.config.await_operator {
                        return None;
                    }
                    let nudge = format!(
                        "Continue by calling tools, or reply \"{}\" once the goal is reached.",
                        self.config.completion_marker
                    );
                    self.transcript.push(ChatTurn::user(nudge));
                } else {
                    observer.phase(RunPhase::Executing);
                    self.session.begin_burst();
                    for call in calls {
                        let before = self.session.records().len();
                        let result = match self.session.invoke(&call.name, &call.arguments) {
                            Ok(v) => json!({ "ok": v }),
                            Err(e) => json!({ "error": e.to_json() }),
                        };
                        self.transcript.push(ChatTurn::tool(call.id, result.to_string()));
                        if self.session.records().len() > before {
                            let rec = self.session.records().last().expect("just appended");
                            observer.record(rec, &self.session, Some(&self.budget));
                        }
                    }
                }
            }
        }
        self.status
    }

    /// Steps until the run finishes.
    pub fn run_to_end(&mut self, provider: &mut dyn Provider, observer: &mut dyn RunObserver) -> RunStatus {
        loop {
            if let Some(status) = self.step(provider, observer) {
                return status;
            }
        }
    }

    pub fn to_log(&self) -> MissionLog {
        let spec = LoadedMission::inline(self.mission.spec.clone(), self.mission.world.clone())
            .expect("a loaded mission stays valid")
            .spec;
        MissionLog {
            mission: spec,
            mode: RunMode::Llm,
            session_config: self.config.session,
            model: Some(self.config.model.clone()),
            records: self.session.records().to_vec(),
            trajectory: self.session.trajectory().to_vec(),
            collisions: self.session.collisions().to_vec(),
            clearance_violations: self.session.clearance_violations().to_vec(),
            transcript: self.transcript.clone(),
            budget: Some(self.budget.clone()),
            calls_used: self.budget.calls_used,
            status: self.status.unwrap_or(RunStatus::Halted),
            halt_reason: self.halt_reason.clone(),
            final_pose: self.session.pose(),
            sim_time: self.session.sim_time(),
        }
    }
}

/// Runs `mission` with the model in the loop until it declares completion,
/// halts, or exhausts its call budget.
pub fn run_llm(
    mission: &LoadedMission,
    provider: &mut dyn Provider,
    config: &LlmRunConfig,
) -> Result<MissionLog, RunError> {
    let mut runner = LlmRunner::new(mission.clone(), config.clone())?;
    runner.run_to_end(provider, &mut NoopObserver);
    Ok(runner.to_log())
}
