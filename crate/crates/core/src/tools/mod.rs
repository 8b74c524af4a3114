//! Tool runtime: call/result types, argument decoding, and the registry that
//! turns every failure into an error result instead of aborting the agent.

mod browse;
mod search;
mod visual;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value, json};

use crate::fetch::{ImageFetcher, PageFetcher};
use crate::middleware::DocMiddleware;
use crate::store::{AssetId, AssetStore};

pub use browse::{FetchImageTool, ScrapeTool};
pub use search::{
    GoogleSearchTool, ImageSearchTool, ReplaySearchBackend, SearchBackend, SearchError, SearchHit, SearchKind,
    SerperBackend, VisualSearchTool, render_image_hits, render_text_hits,
};
pub use visual::{ZoomInTool, crop_region};

pub const DEFAULT_TOP_K: usize = 10;

/// `{"name": ..., "arguments": {...}}` as it appears in trajectories.
/// Arguments serialized as a JSON string are accepted and unpacked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    #[serde(deserialize_with = "arguments_value")]
    pub arguments: Value,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, arguments: Value) -> Self {
        Self {
            name: name.into(),
            arguments,
        }
    }
}

fn arguments_value<'de, D: Deserializer<'de>>(d: D) -> Result<Value, D::Error> {
    let v = Value::deserialize(d)?;
    Ok(unpack_arguments(v))
}

fn unpack_arguments(v: Value) -> Value {
    match v {
        Value::String(s) => serde_json::from_str::<Value>(&s).unwrap_or(Value::String(s)),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub text: String,
    pub materialized_images: Vec<AssetId>,
    /// Every UID the result mentions, so eviction placeholders can keep them.
    #[serde(default)]
    pub referenced_uids: Vec<AssetId>,
    pub is_error: bool,
    pub tool_name: String,
    pub turn_index: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolOutput {
    pub text: String,
    pub materialized: Vec<AssetId>,
    pub referenced: Vec<AssetId>,
}

impl ToolOutput {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolError {
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    #[error("malformed arguments: {0}")]
    MalformedArguments(String),
    #[error("missing argument '{0}'")]
    MissingArgument(String),
    #[error("argument type mismatch: '{name}' must be {expected}")]
    TypeMismatch { name: String, expected: &'static str },
    #[error("{0}")]
    InvalidArgument(String),
    /// Already-rendered failure text (kept verbatim in the result).
    #[error("{0}")]
    Failed(String),
}

pub trait Tool: Send + Sync {
    /// Canonical short name, e.g. `google_search`.
    fn name(&self) -> &'static str;
    /// Prefixed name used on the wire, e.g. `tool-google-search-google_search`.
    fn wire_name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// JSON schema of the arguments object.
    fn parameters(&self) -> Value;
    fn invoke(&self, args: &Args<'_>) -> Result<ToolOutput, ToolError>;
}

/// Typed view over a tool's argument object. Each accessor takes a list of
/// accepted spellings; the first is the documented one.
pub struct Args<'a>(&'a Map<String, Value>);

impl<'a> Args<'a> {
    pub fn new(map: &'a Map<String, Value>) -> Self {
        Self(map)
    }

    fn lookup(&self, keys: &[&str]) -> Option<&'a Value> {
        keys.iter().find_map(|k| self.0.get(*k)).filter(|v| !v.is_null())
    }

    pub fn opt_str(&self, keys: &[&str]) -> Result<Option<&'a str>, ToolError> {
        match self.lookup(keys) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(ToolError::TypeMismatch {
                name: keys[0].to_string(),
                expected: "a string",
            }),
        }
    }

    pub fn str(&self, keys: &[&str]) -> Result<&'a str, ToolError> {
        self.opt_str(keys)?
            .ok_or_else(|| ToolError::MissingArgument(keys[0].to_string()))
    }

    /// Non-negative integer; integral floats and numeric strings are accepted.
    pub fn uint(&self, keys: &[&str]) -> Result<u32, ToolError> {
        let mismatch = || ToolError::TypeMismatch {
            name: keys[0].to_string(),
            expected: "a non-negative integer",
        };
        let v = self
            .lookup(keys)
            .ok_or_else(|| ToolError::MissingArgument(keys[0].to_string()))?;
        let n = match v {
            Value::Number(n) => n
                .as_u64()
                .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64)),
            Value::String(s) => s.trim().parse::<u64>().ok(),
            _ => None,
        }
        .ok_or_else(mismatch)?;
        u32::try_from(n).map_err(|_| mismatch())
    }
}

/// Wire name → tool. Immutable once built.
#[derive(Default)]
pub struct ToolRegistry {
    tools: Vec<Arc<dyn Tool>>,
    by_name: HashMap<String, usize>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tools.iter().map(|t| t.wire_name())).finish()
    }
}

/// Everything the standard tool set needs.
pub struct ToolEnv {
    pub store: Arc<AssetStore>,
    pub search: Arc<dyn SearchBackend>,
    pub pages: Arc<dyn PageFetcher>,
    pub images: Arc<dyn ImageFetcher>,
    pub middleware: Arc<DocMiddleware>,
    pub top_k: usize,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(mut self, tool: Arc<dyn Tool>) -> Self {
        let idx = self.tools.len();
        self.by_name.insert(tool.wire_name().to_string(), idx);
        self.by_name.insert(tool.name().to_string(), idx);
        self.tools.push(tool);
        self
    }

    /// The six tools: three searches, scrape, fetch_image and zoom_in.
    pub fn standard(env: ToolEnv) -> Self {
        Self::new()
            .register(Arc::new(GoogleSearchTool::new(env.search.clone(), env.top_k)))
            .register(Arc::new(ImageSearchTool::new(env.search.clone(), env.store.clone(), env.top_k)))
            .register(Arc::new(VisualSearchTool::new(env.search, env.store.clone(), env.top_k)))
            .register(Arc::new(ScrapeTool::new(env.pages, env.middleware)))
            .register(Arc::new(FetchImageTool::new(env.store.clone(), env.images)))
            .register(Arc::new(ZoomInTool::new(env.store)))
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Tool>> {
        self.by_name.get(name).map(|&i| &self.tools[i])
    }

    pub fn tools(&self) -> &[Arc<dyn Tool>] {
        &self.tools
    }

    /// Function definitions in chat-completions `tools` format.
    pub fn schemas(&self) -> Vec<Value> {
        self.tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {
                        "name": t.wire_name(),
                        "description": t.description(),
                        "parameters": t.parameters(),
                    }
                })
            })
            .collect()
    }

    /// Runs a call. Never fails: unknown tools, bad arguments and backend
    /// errors all come back as `is_error` results.
    pub fn dispatch(&self, call: &ToolCall, turn_index: u32) -> ToolResult {
        let error = |tool_name: &str, text: String| ToolResult {
            text,
            materialized_images: Vec::new(),
            referenced_uids: Vec::new(),
            is_error: true,
            tool_name: tool_name.to_string(),
            turn_index,
        };
        let Some(tool) = self.get(&call.name) else {
            return error(&call.name, ToolError::UnknownTool(call.name.clone()).to_string());
        };
        let args = unpack_arguments(call.arguments.clone());
        let Value::Object(map) = &args else {
            return error(
                tool.name(),
                ToolError::MalformedArguments("arguments must be a JSON object".into()).to_string(),
            );
        };
        match tool.invoke(&Args::new(map)) {
            Ok(out) => ToolResult {
                text: out.text,
                materialized_images: out.materialized,
                referenced_uids: out.referenced,
                is_error: false,
                tool_name: tool.name().to_string(),
                turn_index,
            },
            Err(e) => {
                tracing::debug!(tool = tool.name(), error = %e, "tool call failed");
                error(tool.name(), e.to_string())
            }
        }
    }
}
