//! Chat-completions HTTP adapter.
//!
//! Sends `POST {base_url}/chat/completions` with `model`, `messages`, `tools`,
//! `temperature` and `max_tokens`, authenticated with a bearer token read from
//! [`API_KEY_ENV`]. Reads `choices[0].message` and `usage` from the reply.

use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatTurn, LlmError, ModelConfig, Provider, ProviderResponse, Role, ToolCall, Usage};
use crate::streams::ToolSchema;

pub const API_KEY_ENV: &str = "FLIGHTLINK_API_KEY";

pub struct HttpProvider {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(base_url: &str, api_key: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { base_url: base_url.trim_end_matches('/').to_string(), api_key: api_key.into(), agent }
    }

    /// Reads the API key from the environment.
    pub fn from_env(base_url: &str) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| LlmError::ProviderUnavailable(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(base_url, &key, Duration::from_secs(120)))
    }

    pub fn request_body(history: &[ChatTurn], tools: &[ToolSchema], config: &ModelConfig) -> Value {
        let messages: Vec<Value> = history.iter().map(message_json).collect();
        let tools: Vec<Value> = tools.iter().map(ToolSchema::to_openai_tool).collect();
        json!({
            "model": config.model_name,
            "messages": messages,
            "tools": tools,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        })
    }

    pub fn parse_response(body: &Value) -> Result<ProviderResponse, LlmError> {
        let bad = |m: &str| LlmError::ProviderUnavailable(format!("unexpected response: {m}"));
        let message = body
            .pointer("/choices/0/message")
            .ok_or_else(|| bad("no choices[0].message"))?;
        let content = message.get("content").and_then(Value::as_str).unwrap_or("").to_string();
        let mut tool_calls = Vec::new();
        if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
            for c in calls {
                let id = c.get("id").and_then(Value::as_str).ok_or_else(|| bad("tool call without id"))?;
                let f = c.get("function").ok_or_else(|| bad("tool call without function"))?;
                let name = f.get("name").and_then(Value::as_str).ok_or_else(|| bad("tool call without name"))?;
                // Arguments arrive as a JSON-encoded string; anything that does
                // not parse is passed on verbatim and fails schema validation.
                let arguments = match f.get("arguments") {
                    Some(Value::String(s)) => serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.clone())),
                    Some(v) => v.clone(),
                    None => json!({}),
                };
                tool_calls.push(ToolCall { id: id.into(), name: name.into(), arguments });
            }
        }
        let usage = body.get("usage").and_then(|u| {
            Some(Usage {
                prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
                completion_tokens: u.get("completion_tokens")?.as_u64()?,
            })
        });
        Ok(ProviderResponse { turn: ChatTurn::assistant(content, tool_calls), usage })
    }
}

fn message_json(t: &ChatTurn) -> Value {
    match t.role {
        Role::System => json!({ "role": "system", "content": t.content }),
        Role::User => json!({ "role": "user", "content": t.content }),
        Role::Tool => json!({ "role": "tool", "tool_call_id": t.tool_call_id, "content": t.content }),
        Role::Assistant if t.tool_calls.is_empty() => json!({ "role": "assistant", "content": t.content }),
        Role::Assistant => {
            let calls: Vec<Value> = t
                .tool_calls
                .iter()
                .map(|c| {
                    json!({
                        "id": c.id,
                        "type": "function",
                        "function": { "name": c.name, "arguments": c.arguments.to_string() },
                    })
                })
                .collect();
            json!({ "role": "assistant", "content": t.content, "tool_calls": calls })
        }
    }
}

impl Provider for HttpProvider {
    fn respond(
        &mut self,
        history: &[ChatTurn],
        tools: &[ToolSchema],
        config: &ModelConfig,
    ) -> Result<ProviderResponse, LlmError> {
        let body = Self::request_body(history, tools, config).to_string();
        let url = format!("{}/chat/completions", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(&body)
            .map_err(|e| LlmError::ProviderUnavailable(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::ProviderUnavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::ProviderUnavailable(format!("HTTP {status}: {text}")));
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| LlmError::ProviderUnavailable(format!("invalid JSON: {e}")))?;
        Self::parse_response(&value)
    }
}
