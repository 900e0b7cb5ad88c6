//! Chat-completions wire format: request bodies and reply parsing.

use serde_json::{json, Map, Value};

use super::{Message, ProviderError, ProviderResponse, Role};
use crate::skills::{FunctionSchema, ToolInvocation};

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
    }
}

fn message_json(m: &Message) -> Value {
    let mut obj = Map::new();
    obj.insert("role".into(), json!(role_name(m.role)));
    match (&m.role, &m.tool_invocation) {
        (Role::Assistant, Some(call)) => {
            obj.insert("content".into(), Value::Null);
            obj.insert(
                "tool_calls".into(),
                json!([{
                    "id": call.id,
                    "type": "function",
                    "function": {
                        "name": call.name,
                        "arguments": Value::Object(call.arguments.clone()).to_string(),
                    }
                }]),
            );
        }
        _ => {
            obj.insert("content".into(), json!(m.content));
        }
    }
    if let Some(id) = &m.tool_call_id {
        obj.insert("tool_call_id".into(), json!(id));
    }
    Value::Object(obj)
}

/// Request body for `POST {endpoint}`.
pub fn build_request(model: &str, history: &[Message], tools: &[FunctionSchema]) -> Value {
    let mut body = Map::new();
    body.insert("model".into(), json!(model));
    body.insert(
        "messages".into(),
        Value::Array(history.iter().map(message_json).collect()),
    );
    if !tools.is_empty() {
        body.insert(
            "tools".into(),
            Value::Array(
                tools
                    .iter()
                    .map(|t| {
                        json!({
                            "type": "function",
                            "function": {
                                "name": t.name,
                                "description": t.description,
                                "parameters": t.parameters,
                            }
                        })
                    })
                    .collect(),
            ),
        );
    }
    Value::Object(body)
}

fn malformed(reason: impl Into<String>) -> ProviderError {
    ProviderError::MalformedProviderReply(reason.into())
}

/// Read `choices[0].message`. A tool call wins over text; only the first
/// tool call is used.
pub fn parse_response(body: &Value) -> Result<ProviderResponse, ProviderError> {
    if let Some(err) = body.get("error") {
        let msg = err
            .get("message")
            .and_then(Value::as_str)
            .unwrap_or("unknown error");
        return Err(ProviderError::ProviderUnavailable(msg.to_string()));
    }
    let message = body
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .ok_or_else(|| malformed("missing choices[0].message"))?;

    if let Some(call) = message
        .get("tool_calls")
        .and_then(Value::as_array)
        .and_then(|calls| calls.first())
    {
        let function = call
            .get("function")
            .ok_or_else(|| malformed("tool call without function"))?;
        let name = function
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("tool call without name"))?;
        let arguments = match function.get("arguments") {
            None | Some(Value::Null) => Value::Object(Map::new()),
            Some(Value::String(s)) if s.trim().is_empty() => Value::Object(Map::new()),
            Some(Value::String(s)) => serde_json::from_str(s)
                .map_err(|e| malformed(format!("tool arguments are not JSON: {e}")))?,
            Some(v @ Value::Object(_)) => v.clone(),
            Some(other) => return Err(malformed(format!("unexpected arguments {other}"))),
        };
        if !arguments.is_object() {
            return Err(malformed("tool arguments must be an object"));
        }
        let id = call.get("id").and_then(Value::as_str).unwrap_or_default();
        return Ok(ProviderResponse::Invocation(
            ToolInvocation::new(name, arguments).with_id(id),
        ));
    }

    match message.get("content") {
        Some(Value::String(text)) => Ok(ProviderResponse::Text(text.clone())),
        _ => Err(malformed("message has neither content nor tool calls")),
    }
}

/// Inverse of [`build_request`] for the messages list; used to check that
/// recorded requests round-trip.
pub fn parse_request_messages(body: &Value) -> Result<Vec<Message>, ProviderError> {
    let messages = body
        .get("messages")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing messages"))?;
    messages
        .iter()
        .map(|m| {
            let role = match m.get("role").and_then(Value::as_str) {
                Some("system") => Role::System,
                Some("user") => Role::User,
                Some("assistant") => Role::Assistant,
                Some("tool") => Role::Tool,
                other => return Err(malformed(format!("bad role {other:?}"))),
            };
            let content = m
                .get("content")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            let tool_invocation = match m.get("tool_calls") {
                Some(_) => match parse_response(&json!({"choices": [{"message": m}]}))? {
                    ProviderResponse::Invocation(call) => Some(call),
                    ProviderResponse::Text(_) => None,
                },
                None => None,
            };
            Ok(Message {
                role,
                content,
                tool_invocation,
                tool_call_id: m
                    .get("tool_call_id")
                    .and_then(Value::as_str)
                    .map(String::from),
            })
        })
        .collect()
}
