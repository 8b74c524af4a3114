//! Model endpoints the agent talks to.

use std::collections::VecDeque;
use std::path::Path;

use base64::Engine;
use base64::engine::general_purpose::STANDARD;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{Value, json};

use super::answer::parse_tool_calls;
use super::context::Role;
use crate::chat::{ChatError, OpenAiCompatClient};
use crate::store::AssetId;
use crate::tools::ToolCall;

/// Pixels attached to a message on its way to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub uid: AssetId,
    pub media_type: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMessage {
    pub role: Role,
    pub text: String,
    pub images: Vec<ImagePayload>,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelRequest<'a> {
    pub messages: &'a [ModelMessage],
    /// Function definitions; empty when tool use is disabled.
    pub tools: &'a [Value],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelReply {
    pub text: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("scripted model has no turns left")]
    ScriptExhausted,
    #[error("bad model fixture {path}: {message}")]
    BadFixture { path: String, message: String },
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &ModelRequest<'_>) -> Result<ModelReply, ModelError>;
}

/// One scripted assistant turn. A tool call may be given explicitly or as
/// `<tool_call>` markup inside `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedTurn {
    Text(String),
    Full {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tool_call: Option<ToolCall>,
    },
}

impl ScriptedTurn {
    fn into_reply(self) -> ModelReply {
        let (text, call) = match self {
            Self::Text(t) => (t, None),
            Self::Full { text, tool_call } => (text, tool_call),
        };
        let tool_calls = match call {
            Some(c) => vec![c],
            None => parse_tool_calls(&text).into_iter().filter_map(Result::ok).collect(),
        };
        ModelReply { text, tool_calls }
    }
}

/// Replays a fixed list of assistant turns, recording what it was shown.
#[derive(Debug, Default)]
pub struct ScriptedModel {
    turns: Mutex<VecDeque<ScriptedTurn>>,
    image_counts: Mutex<Vec<usize>>,
}

impl ScriptedModel {
    pub fn new(turns: Vec<ScriptedTurn>) -> Self {
        Self {
            turns: Mutex::new(turns.into()),
            image_counts: Mutex::default(),
        }
    }

    /// Loads `<fixture_dir>/model/<task_id>.json`.
    pub fn from_fixture(fixture_dir: &Path, task_id: &str) -> Result<Self, ModelError> {
        let path = fixture_dir.join("model").join(format!("{task_id}.json"));
        let bad = |message: String| ModelError::BadFixture {
            path: path.display().to_string(),
            message,
        };
        let raw = std::fs::read(&path).map_err(|e| bad(e.to_string()))?;
        let turns: Vec<ScriptedTurn> = serde_json::from_slice(&raw).map_err(|e| bad(e.to_string()))?;
        Ok(Self::new(turns))
    }

    /// Images attached to each request received, in call order.
    pub fn image_counts(&self) -> Vec<usize> {
        self.image_counts.lock().clone()
    }

    pub fn remaining(&self) -> usize {
        self.turns.lock().len()
    }
}

impl ModelClient for ScriptedModel {
    fn complete(&self, request: &ModelRequest<'_>) -> Result<ModelReply, ModelError> {
        let turn = self.turns.lock().pop_front().ok_or(ModelError::ScriptExhausted)?;
        self.image_counts
            .lock()
            .push(request.messages.iter().map(|m| m.images.len()).sum());
        Ok(turn.into_reply())
    }
}

/// Chat-completions endpoint with function calling. Tool results are sent
/// back as user turns wrapped in `<tool_response>` so their images can ride
/// along as content parts.
pub struct OpenAiModel {
    client: OpenAiCompatClient,
}

impl OpenAiModel {
    pub fn new(client: OpenAiCompatClient) -> Self {
        Self { client }
    }

    /// `MODEL_API_URL` / `MODEL_API_KEY` (and `MODEL_NAME`).
    pub fn from_env() -> Option<Self> {
        OpenAiCompatClient::from_env("MODEL_API_URL", "MODEL_API_KEY").map(Self::new)
    }
}

pub(crate) fn wire_messages(messages: &[ModelMessage]) -> Vec<Value> {
    messages
        .iter()
        .map(|m| {
            let (role, text) = match m.role {
                Role::System => ("system", m.text.clone()),
                Role::User => ("user", m.text.clone()),
                Role::Assistant => ("assistant", m.text.clone()),
                Role::Tool => ("user", format!("<tool_response>\n{}\n</tool_response>", m.text)),
            };
            if m.images.is_empty() {
                return json!({"role": role, "content": text});
            }
            let mut parts = vec![json!({"type": "text", "text": text})];
            for img in &m.images {
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:{};base64,{}", img.media_type, STANDARD.encode(&img.bytes))}
                }));
            }
            json!({"role": role, "content": parts})
        })
        .collect()
}

pub(crate) fn parse_reply(message: &Value) -> ModelReply {
    let text = message.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut tool_calls: Vec<ToolCall> = message
        .get("tool_calls")
        .and_then(Value::as_array)
        .map(|calls| {
            calls
                .iter()
                .filter_map(|c| {
                    let f = c.get("function")?;
                    let name = f.get("name")?.as_str()?.to_string();
                    let args = match f.get("arguments") {
                        Some(Value::String(s)) => serde_json::from_str(s).unwrap_or(Value::String(s.clone())),
                        Some(v) => v.clone(),
                        None => json!({}),
                    };
                    Some(ToolCall::new(name, args))
                })
                .collect()
        })
        .unwrap_or_default();
    if tool_calls.is_empty() {
        tool_calls = parse_tool_calls(&text).into_iter().filter_map(Result::ok).collect();
    }
    ModelReply { text, tool_calls }
}

impl ModelClient for OpenAiModel {
    fn complete(&self, request: &ModelRequest<'_>) -> Result<ModelReply, ModelError> {
        let mut body = json!({"messages": wire_messages(request.messages)});
        if !request.tools.is_empty() {
            body["tools"] = Value::Array(request.tools.to_vec());
        }
        let message = self.client.complete(body)?;
        Ok(parse_reply(&message))
    }
}
