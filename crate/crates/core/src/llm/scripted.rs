//! Deterministic provider driven by a JSON fixture of matcher/response pairs.
//!
//! A responder matches when every field of its `match` block holds:
//! `turn` is the number of assistant turns already in the conversation and
//! `last_contains` is a substring of the latest non-assistant turn. The first
//! matching responder wins. Tool-call ids are derived from the turn number, so
//! identical conversations always produce identical transcripts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChatTurn, LlmError, ModelConfig, Provider, ProviderResponse, Role, ToolCall, Usage};
use crate::streams::ToolSchema;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_contains: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedToolCall {
    pub name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ScriptedToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responder {
    #[serde(rename = "match", default)]
    pub matcher: ScriptMatch,
    pub response: ScriptedResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptFixture {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub responders: Vec<Responder>,
}

impl ScriptFixture {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::InvalidFixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::InvalidFixture(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixtures serialize");
        s.push('\n');
        s
    }

    /// One responder per turn, in order, followed by a closing text turn.
    pub fn from_turns(description: &str, turns: Vec<Vec<ScriptedToolCall>>, closing: &str) -> Self {
        let n = turns.len();
        let mut responders: Vec<Responder> = turns
            .into_iter()
            .enumerate()
            .map(|(i, tool_calls)| Responder {
                matcher: ScriptMatch { turn: Some(i), last_contains: None },
                response: ScriptedResponse { content: String::new(), tool_calls, usage: None },
            })
            .collect();
        responders.push(Responder {
            matcher: ScriptMatch { turn: Some(n), last_contains: None },
            response: ScriptedResponse { content: closing.into(), tool_calls: vec![], usage: None },
        });
        ScriptFixture { description: description.into(), responders }
    }

    /// Checks every canned tool call against `tools`.
    pub fn validate(&self, tools: &[ToolSchema]) -> Result<(), LlmError> {
        for (i, r) in self.responders.iter().enumerate() {
            for c in &r.response.tool_calls {
                let schema = tools
                    .iter()
                    .find(|t| t.name == c.name)
                    .ok_or_else(|| LlmError::InvalidFixture(format!("responder {i}: unknown tool {}", c.name)))?;
                schema
                    .validate_args(&c.arguments)
                    .map_err(|e| LlmError::InvalidFixture(format!("responder {i}: {}: {e}", c.name)))?;
            }
        }
        Ok(())
    }
}

/// Stateless: the reply depends only on the conversation so far.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    fixture: ScriptFixture,
}

impl ScriptedProvider {
    pub fn new(fixture: ScriptFixture) -> Self {
        Self { fixture }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        ScriptFixture::load(path).map(Self::new)
    }

    pub fn fixture(&self) -> &ScriptFixture {
        &self.fixture
    }
}

impl Provider for ScriptedProvider {
    fn respond(
        &mut self,
        history: &[ChatTurn],
        _tools: &[ToolSchema],
        _config: &ModelConfig,
    ) -> Result<ProviderResponse, LlmError> {
        let turn = history.iter().filter(|t| t.role == Role::Assistant).count();
        let last = history
            .iter()
            .rev()
            .find(|t| t.role != Role::Assistant)
            .map(|t| t.content.as_str())
            .unwrap_or("");
        let responder = self
            .fixture
            .responders
            .iter()
            .find(|r| {
                r.matcher.turn.is_none_or(|n| n == turn)
                    && r.matcher.last_contains.as_deref().is_none_or(|s| last.contains(s))
            })
            .ok_or_else(|| LlmError::ProviderUnavailable(format!("no scripted response for turn {turn}")))?;
        let tool_calls = responder
            .response
            .tool_calls
            .iter()
            .enumerate()
            .map(|(k, c)| ToolCall {
                id: format!("call_{turn}_{k}"),
                name: c.name.clone(),
                arguments: c.arguments.clone(),
            })
            .collect();
        Ok(ProviderResponse {
            turn: ChatTurn::assistant(responder.response.content.clone(), tool_calls),
            usage: responder.response.usage,
        })
    }
}
