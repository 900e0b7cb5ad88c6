//! Chat-completion provider contract.
//!
//! Two providers implement it: [`RemoteProvider`] speaks the OpenAI-style
//! chat-completions protocol over HTTP, and [`OracleProvider`] is a
//! deterministic rule-based stand-in used for offline runs and tests.

mod oracle;
mod remote;
pub mod wire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skills::{FunctionSchema, ToolInvocation};

pub use oracle::{
    oracle_parse_dish_request, oracle_parse_request, DishRequestParse, OracleProvider,
    OracleRequestParse,
};
pub use remote::{RemoteConfig, RemoteProvider, DEFAULT_API_KEY_ENV};

/// Marker line embedded in the planner system prompt.
pub const PLANNER_MARKER: &str = "## mode: high-level-planner";
/// Marker line embedded in the executor system prompt.
pub const EXECUTOR_MARKER: &str = "## mode: low-level-executor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_invocation: Option<ToolInvocation>,
    /// For tool messages: id of the invocation this result answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl Message {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
            tool_invocation: None,
            tool_call_id: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn assistant_call(call: ToolInvocation) -> Self {
        Message {
            role: Role::Assistant,
            content: String::new(),
            tool_invocation: Some(call),
            tool_call_id: None,
        }
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Message {
            role: Role::Tool,
            content: content.into(),
            tool_invocation: None,
            tool_call_id: Some(call_id.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderResponse {
    Text(String),
    Invocation(ToolInvocation),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("malformed provider reply: {0}")]
    MalformedProviderReply(String),
    #[error("invalid history: {0}")]
    InvalidHistory(String),
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(
        &self,
        history: &[Message],
        tools: &[FunctionSchema],
    ) -> Result<ProviderResponse, ProviderError>;
}

/// History must open with a system message, and every tool message must
/// answer an invocation made earlier.
pub fn validate_history(history: &[Message]) -> Result<(), ProviderError> {
    match history.first() {
        None => return Err(ProviderError::InvalidHistory("history is empty".into())),
        Some(m) if m.role != Role::System => {
            return Err(ProviderError::InvalidHistory(
                "first message must be a system message".into(),
            ))
        }
        Some(_) => {}
    }
    let mut issued: Vec<&str> = Vec::new();
    for (i, m) in history.iter().enumerate() {
        match m.role {
            Role::Assistant => {
                if let Some(call) = &m.tool_invocation {
                    issued.push(call.id.as_str());
                }
            }
            Role::Tool => {
                let id = m.tool_call_id.as_deref().unwrap_or("");
                if !issued.contains(&id) {
                    return Err(ProviderError::InvalidHistory(format!(
                        "tool message {i} answers unknown invocation '{id}'"
                    )));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn history_rules() {
        assert!(validate_history(&[]).is_err());
        assert!(validate_history(&[Message::user("hi")]).is_err());
        let call = ToolInvocation::new("step_complete", json!({})).with_id("c1");
        let ok = [
            Message::system("s"),
            Message::user("u"),
            Message::assistant_call(call),
            Message::tool_result("c1", "step complete"),
        ];
        assert!(validate_history(&ok).is_ok());
        let orphan = [Message::system("s"), Message::tool_result("c9", "x")];
        assert!(validate_history(&orphan).is_err());
    }
}
