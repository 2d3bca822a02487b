//! Provider-agnostic chat / tool-calling bridge with call, token and cost
//! accounting.
//!
//! [`complete`] is the only way a model turn enters the mission loop. It
//! refuses to run once the call budget is spent, charges every response, and
//! rejects tool calls whose arguments do not match the stream schemas, so
//! nothing malformed ever reaches a [`crate::streams::Session`].

mod http;
mod prompt;
mod scripted;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::streams::{SchemaError, ToolSchema};

pub use http::{HttpProvider, API_KEY_ENV};
pub use prompt::{build_system_prompt, build_system_prompt_with, DEFAULT_COMPLETION_MARKER};
pub use scripted::{Responder, ScriptFixture, ScriptMatch, ScriptedProvider, ScriptedResponse, ScriptedToolCall};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("call budget exhausted ({used}/{limit} calls)")]
    BudgetExceeded { used: u32, limit: u32 },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("malformed tool call {tool_call_id} to `{name}`: {error}")]
    MalformedToolCall {
        /// The offending assistant turn, so callers can answer its tool calls.
        turn: Box<ChatTurn>,
        tool_call_id: String,
        name: String,
        error: SchemaError,
    },
    #[error("model `{0}` is not in the price table")]
    UnknownModel(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid conversation: {0}")]
    InvalidHistory(String),
    #[error("invalid script fixture: {0}")]
    InvalidFixture(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_name: String,
    pub max_tokens: u32,
    /// 0 is the default, for reproducible runs.
    #[serde(default)]
    pub temperature: f64,
    /// Replaces the generated system prompt when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { model_name: "scripted".into(), max_tokens: 1024, temperature: 0.0, system_prompt: None }
    }
}

impl ModelConfig {
    pub fn new(model_name: &str) -> Self {
        Self { model_name: model_name.into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.model_name.is_empty() {
            return Err(LlmError::InvalidConfig("model_name is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidConfig("max_tokens must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidConfig(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatTurn {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into(), tool_calls: vec![], tool_call_id: None }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into(), tool_calls: vec![], tool_call_id: None }
    }

    pub fn assistant(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        Self { role: Role::Assistant, content: content.into(), tool_calls, tool_call_id: None }
    }

    pub fn tool(tool_call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            role: Role::Tool,
            content: content.into(),
            tool_calls: vec![],
            tool_call_id: Some(tool_call_id.into()),
        }
    }
}

/// Price in currency units per 1000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Price {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

/// Editable model price table. The shipped numbers are configuration only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(pub BTreeMap<String, Price>);

impl Default for PriceTable {
    fn default() -> Self {
        let entries = [
            ("scripted", 0.0, 0.0),
            ("gpt-4o-mini", 0.00015, 0.0006),
            ("gpt-4o", 0.0025, 0.01),
            ("gpt-4-turbo", 0.01, 0.03),
            ("gpt-3.5-turbo", 0.0005, 0.0015),
        ];
        PriceTable(
            entries
                .into_iter()
                .map(|(m, i, o)| (m.to_string(), Price { input_per_1k: i, output_per_1k: o }))
                .collect(),
        )
    }
}

impl PriceTable {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::InvalidConfig(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::InvalidConfig(e.to_string()))
    }

    pub fn with(mut self, model: &str, input_per_1k: f64, output_per_1k: f64) -> Self {
        self.0.insert(model.into(), Price { input_per_1k, output_per_1k });
        self
    }

    pub fn get(&self, model: &str) -> Option<Price> {
        self.0.get(model).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiBudget {
    pub call_limit: u32,
    pub calls_used: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub accrued_cost: f64,
    pub price_table: PriceTable,
}

impl ApiBudget {
    pub fn new(call_limit: u32, price_table: PriceTable) -> Self {
        Self { call_limit, calls_used: 0, prompt_tokens: 0, completion_tokens: 0, accrued_cost: 0.0, price_table }
    }

    pub fn remaining(&self) -> u32 {
        self.call_limit - self.calls_used
    }

    pub fn is_exhausted(&self) -> bool {
        self.calls_used >= self.call_limit
    }

    /// Accrues token counts and their cost for one response.
    pub fn charge(&mut self, model: &str, prompt_tokens: u64, completion_tokens: u64) -> Result<(), LlmError> {
        let price = self.price_table.get(model).ok_or_else(|| LlmError::UnknownModel(model.into()))?;
        self.prompt_tokens += prompt_tokens;
        self.completion_tokens += completion_tokens;
        self.accrued_cost += prompt_tokens as f64 / 1000.0 * price.input_per_1k
            + completion_tokens as f64 / 1000.0 * price.output_per_1k;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderResponse {
    pub turn: ChatTurn,
    /// Token usage as reported by the provider, if it reports any.
    pub usage: Option<Usage>,
}

/// Source of assistant turns.
pub trait Provider: Send {
    fn respond(
        &mut self,
        history: &[ChatTurn],
        tools: &[ToolSchema],
        config: &ModelConfig,
    ) -> Result<ProviderResponse, LlmError>;
}

/// Rough token count used when a provider reports no usage: four characters
/// per token, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

fn estimate_turns(turns: &[ChatTurn]) -> u64 {
    turns
        .iter()
        .map(|t| estimate_tokens(&serde_json::to_string(t).expect("turns serialize")))
        .sum()
}

/// Obtains one assistant turn from `provider`.
///
/// Fails with `BudgetExceeded` before contacting the provider once the call
/// limit is reached. Each provider response counts as one call and is charged
/// whether or not its tool calls pass validation.
pub fn complete(
    provider: &mut dyn Provider,
    history: &[ChatTurn],
    tools: &[ToolSchema],
    config: &ModelConfig,
    budget: &mut ApiBudget,
) -> Result<ChatTurn, LlmError> {
    if budget.is_exhausted() {
        return Err(LlmError::BudgetExceeded { used: budget.calls_used, limit: budget.call_limit });
    }
    config.validate()?;
    if budget.price_table.get(&config.model_name).is_none() {
        return Err(LlmError::UnknownModel(config.model_name.clone()));
    }
    match history.first() {
        Some(t) if t.role == Role::System => {}
        Some(_) => return Err(LlmError::InvalidHistory("first turn must be the system prompt".into())),
        None => return Err(LlmError::InvalidHistory("history is empty".into())),
    }
    if let Some(t) = history.iter().find(|t| t.role == Role::Tool && t.tool_call_id.is_none()) {
        return Err(LlmError::InvalidHistory(format!("tool turn without tool_call_id: {}", t.content)));
    }

    let response = provider.respond(history, tools, config)?;
    let mut turn = response.turn;
    turn.role = Role::Assistant;
    turn.tool_call_id = None;
    let usage = response.usage.unwrap_or_else(|| Usage {
        prompt_tokens: estimate_turns(history),
        completion_tokens: estimate_turns(std::slice::from_ref(&turn)),
    });
    budget.calls_used += 1;
    budget.charge(&config.model_name, usage.prompt_tokens, usage.completion_tokens)?;

    for call in &turn.tool_calls {
        let check = match tools.iter().find(|t| t.name == call.name) {
            Some(schema) => schema.validate_args(&call.arguments),
            None => Err(SchemaError { field: "name".into(), reason: format!("unknown tool `{}`", call.name) }),
        };
        if let Err(error) = check {
            return Err(LlmError::MalformedToolCall {
                tool_call_id: call.id.clone(),
                name: call.name.clone(),
                error,
                turn: Box::new(turn.clone()),
            });
        }
    }
    Ok(turn)
}

/// Loads a price table file if given, else the shipped defaults.
pub fn price_table_from(path: Option<&Path>) -> Result<PriceTable, LlmError> {
    match path {
        Some(p) => PriceTable::load(p),
        None => Ok(PriceTable::default()),
    }
}
