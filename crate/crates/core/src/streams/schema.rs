//! Tool schemas for the interaction streams and argument validation.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("field `{field}`: {reason}")]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamKind {
    Number,
    String,
    Enum { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
    pub description: String,
}

impl ParamSpec {
    pub fn number(name: &str, description: &str) -> Self {
        Self { name: name.into(), kind: ParamKind::Number, required: true, description: description.into() }
    }

    pub fn string(name: &str, description: &str) -> Self {
        Self { name: name.into(), kind: ParamKind::String, required: true, description: description.into() }
    }

    pub fn one_of(name: &str, values: &[&str], description: &str) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Enum { values: values.iter().map(|v| v.to_string()).collect() },
            required: true,
            description: description.into(),
        }
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    fn json_schema(&self) -> Value {
        match &self.kind {
            ParamKind::Number => json!({ "type": "number", "description": self.description }),
            ParamKind::String => json!({ "type": "string", "description": self.description }),
            ParamKind::Enum { values } => {
                json!({ "type": "string", "enum": values, "description": self.description })
            }
        }
    }

    fn check(&self, value: &Value) -> Result<(), SchemaError> {
        let fail = |reason: String| Err(SchemaError { field: self.name.clone(), reason });
        match (&self.kind, value) {
            (ParamKind::Number, Value::Number(n)) => match n.as_f64() {
                Some(v) if v.is_finite() => Ok(()),
                _ => fail("not a finite number".into()),
            },
            (ParamKind::Number, other) => fail(format!("expected number, got {}", kind_of(other))),
            (ParamKind::String, Value::String(_)) => Ok(()),
            (ParamKind::String, other) => fail(format!("expected string, got {}", kind_of(other))),
            (ParamKind::Enum { values }, Value::String(s)) if values.contains(s) => Ok(()),
            (ParamKind::Enum { values }, other) => {
                fail(format!("expected one of {values:?}, got {other}"))
            }
        }
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Name, description and parameter list of one callable stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl ToolSchema {
    /// JSON Schema object for the parameters, as sent to chat-completion APIs.
    pub fn parameters_json(&self) -> Value {
        let properties: Map<String, Value> = self
            .parameters
            .iter()
            .map(|p| (p.name.clone(), p.json_schema()))
            .collect();
        let required: Vec<&str> = self
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({
            "type": "object",
            "properties": properties,
            "required": required,
            "additionalProperties": false,
        })
    }

    /// Function-tool entry in the chat-completions wire format.
    pub fn to_openai_tool(&self) -> Value {
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters_json(),
            }
        })
    }

    /// Checks that `args` is an object with every required field, correctly
    /// typed values and no unknown fields.
    pub fn validate_args(&self, args: &Value) -> Result<(), SchemaError> {
        let Value::Object(map) = args else {
            return Err(SchemaError {
                field: "<arguments>".into(),
                reason: format!("expected object, got {}", kind_of(args)),
            });
        };
        for p in &self.parameters {
            match map.get(&p.name) {
                Some(Value::Null) | None if p.required => {
                    return Err(SchemaError { field: p.name.clone(), reason: "missing required field".into() })
                }
                Some(Value::Null) | None => {}
                Some(v) => p.check(v)?,
            }
        }
        if let Some(extra) = map.keys().find(|k| !self.parameters.iter().any(|p| &p.name == *k)) {
            return Err(SchemaError { field: extra.clone(), reason: "unknown field".into() });
        }
        Ok(())
    }
}
