//! The long-horizon agent loop.
//!
//! Each turn the agent trims the context with the keep-recent-K policy,
//! checks the token budget, calls the model, and executes at most one tool
//! call. Images enter the model's view only as attachments of the task
//! prompt or of `fetch_image`/`zoom_in` results; everything else refers to
//! them by UID.

mod answer;
mod context;
mod model;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use answer::{boxed_answer, contains_tool_call, extract_final_answer, parse_tool_calls, tool_call_markup};
pub use context::{
    CharHeuristic, ContextPolicy, DEFAULT_IMAGE_TOKENS, DEFAULT_SUMMARY_PROMPT, Message, PolicyError, Role,
    TokenCounter, ToolMeta, apply_eviction, count_context, image_count, placeholder_text,
};
pub use model::{
    ImagePayload, ModelClient, ModelError, ModelMessage, ModelReply, ModelRequest, OpenAiModel, ScriptedModel,
    ScriptedTurn,
};

use crate::store::{AssetId, AssetStore, StoreError};
use crate::tools::{ToolCall, ToolRegistry, ToolResult};

pub const DEFAULT_SYSTEM_PROMPT: &str = "You are a multimodal deep-search agent. Solve the user's question step by step. \
Think inside <think></think>, then either call exactly one tool as \
<tool_call>{\"name\": <tool name>, \"arguments\": {...}}</tool_call> or give your final answer. \
Images are referred to by their URL; search results only list image URLs, so use fetch_image to look at an image \
and zoom_in to inspect a region of one. Put the final answer inside \\boxed{}.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The model stopped calling tools and answered.
    #[serde(rename = "self")]
    SelfTerminated,
    TurnBudget,
    ContextBudget,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub turn_index: u32,
    pub call: ToolCall,
    pub tool_name: String,
    pub is_error: bool,
    pub materialized_images: Vec<AssetId>,
    /// Leading characters of the result text.
    pub preview: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub question: String,
    pub input_images: Vec<AssetId>,
    pub messages: Vec<Message>,
    pub tool_calls: Vec<ToolCallRecord>,
    pub final_answer: Option<String>,
    pub terminated_by: Termination,
    pub turns_used: u32,
    pub peak_context_tokens: usize,
    /// Largest number of images attached to a single model call.
    pub peak_context_images: usize,
    pub max_turns: u32,
    pub keep_recent_k: Option<usize>,
    pub max_context_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
}

impl Trajectory {
    /// Tool-role messages, i.e. tool-use turns.
    pub fn tool_turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Tool).count()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectories serialize")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("input image {0} is not in the asset store")]
    UnresolvedInput(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            base_delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub policy: ContextPolicy,
    pub system_prompt: String,
    pub retry: RetryPolicy,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            policy: ContextPolicy::default(),
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
            retry: RetryPolicy::default(),
        }
    }
}

impl AgentConfig {
    pub fn with_policy(policy: ContextPolicy) -> Self {
        Self {
            policy,
            ..Self::default()
        }
    }
}

pub struct Agent {
    model: Arc<dyn ModelClient>,
    registry: Arc<ToolRegistry>,
    store: Arc<AssetStore>,
    config: AgentConfig,
}

enum CallFailure {
    ContextBudget,
    Model(ModelError),
    Store(StoreError),
}

#[derive(Default)]
struct Accounting {
    peak_tokens: usize,
    peak_images: usize,
}

const PREVIEW_CHARS: usize = 200;

pub fn task_prompt(question: &str, input_images: &[AssetId]) -> String {
    let mut text = question.trim().to_string();
    for uid in input_images {
        text.push_str(&format!("\nImage URL: {uid}  Description: Original input image"));
    }
    text
}

impl Agent {
    pub fn new(
        model: Arc<dyn ModelClient>,
        registry: Arc<ToolRegistry>,
        store: Arc<AssetStore>,
        config: AgentConfig,
    ) -> Self {
        Self {
            model,
            registry,
            store,
            config,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn run_task(&self, task_id: &str, question: &str, input_images: &[AssetId]) -> Result<Trajectory, AgentError> {
        let policy = &self.config.policy;
        let mut inputs = Vec::with_capacity(input_images.len());
        for uid in input_images {
            inputs.push(
                self.store
                    .canonical(uid.as_str())
                    .ok_or_else(|| AgentError::UnresolvedInput(uid.to_string()))?,
            );
        }

        let mut messages = vec![
            Message::system(self.config.system_prompt.clone()),
            Message::user(task_prompt(question, &inputs), inputs.clone()),
        ];
        let mut tool_calls = Vec::new();
        let mut acct = Accounting::default();
        let mut turns: u32 = 0;
        let mut final_answer = None;
        let mut error = None;
        let tools = self.registry.schemas();

        let terminated_by = loop {
            if turns >= policy.max_turns {
                messages.push(Message::user(policy.summary_prompt.clone(), Vec::new()));
                match self.call_model(&mut messages, &[], &mut acct) {
                    Ok(reply) => {
                        let text = self.assistant_text(&reply);
                        final_answer = extract_final_answer(&text);
                        messages.push(Message::assistant(text));
                        break Termination::TurnBudget;
                    }
                    Err(failure) => break self.fail(failure, &mut error),
                }
            }

            let reply = match self.call_model(&mut messages, &tools, &mut acct) {
                Ok(r) => r,
                Err(failure) => break self.fail(failure, &mut error),
            };
            turns += 1;
            let text = self.assistant_text(&reply);
            messages.push(Message::assistant(text.clone()));

            if reply.tool_calls.is_empty() {
                final_answer = extract_final_answer(&text);
                if policy.final_summary && boxed_answer(&text).is_none() && turns < policy.max_turns {
                    messages.push(Message::user(policy.summary_prompt.clone(), Vec::new()));
                    match self.call_model(&mut messages, &[], &mut acct) {
                        Ok(summary) => {
                            turns += 1;
                            let summary_text = self.assistant_text(&summary);
                            if let Some(ans) = extract_final_answer(&summary_text) {
                                final_answer = Some(ans);
                            }
                            messages.push(Message::assistant(summary_text));
                        }
                        Err(failure) => {
                            // An answer is already in hand; only record the failure.
                            let mut ignored = None;
                            let _ = self.fail(failure, &mut ignored);
                            tracing::warn!(task_id, error = ?ignored, "final summary call failed");
                        }
                    }
                }
                break Termination::SelfTerminated;
            }

            let (call, result) = if reply.tool_calls.len() > 1 {
                let call = reply.tool_calls[0].clone();
                let result = ToolResult {
                    text: format!(
                        "{} tool calls in one turn; issue exactly one tool call per turn and retry",
                        reply.tool_calls.len()
                    ),
                    materialized_images: Vec::new(),
                    referenced_uids: Vec::new(),
                    is_error: true,
                    tool_name: "(multiple)".to_string(),
                    turn_index: turns,
                };
                (call, result)
            } else {
                let call = reply.tool_calls[0].clone();
                let result = self.registry.dispatch(&call, turns);
                (call, result)
            };

            tool_calls.push(ToolCallRecord {
                turn_index: turns,
                call,
                tool_name: result.tool_name.clone(),
                is_error: result.is_error,
                materialized_images: result.materialized_images.clone(),
                preview: result.text.chars().take(PREVIEW_CHARS).collect(),
            });
            let mut uids = result.referenced_uids.clone();
            for img in &result.materialized_images {
                if !uids.contains(img) {
                    uids.push(img.clone());
                }
            }
            messages.push(Message::tool(
                result.text,
                result.materialized_images,
                ToolMeta {
                    turn_index: turns,
                    tool_name: result.tool_name,
                    is_error: result.is_error,
                    uids,
                },
            ));
        };

        Ok(Trajectory {
            task_id: task_id.to_string(),
            question: question.to_string(),
            input_images: inputs,
            messages,
            tool_calls,
            final_answer,
            terminated_by,
            turns_used: turns,
            peak_context_tokens: acct.peak_tokens,
            peak_context_images: acct.peak_images,
            max_turns: policy.max_turns,
            keep_recent_k: policy.keep_recent_k,
            max_context_tokens: policy.max_context_tokens,
            error,
            success: None,
        })
    }

    fn fail(&self, failure: CallFailure, error: &mut Option<String>) -> Termination {
        match failure {
            CallFailure::ContextBudget => Termination::ContextBudget,
            CallFailure::Model(e) => {
                *error = Some(e.to_string());
                Termination::Error
            }
            CallFailure::Store(e) => {
                *error = Some(e.to_string());
                Termination::Error
            }
        }
    }

    /// Assistant text as recorded: the model's text plus call markup if the
    /// endpoint returned calls out of band.
    fn assistant_text(&self, reply: &ModelReply) -> String {
        if reply.tool_calls.is_empty() || contains_tool_call(&reply.text) {
            return reply.text.clone();
        }
        let mut text = reply.text.trim_end().to_string();
        for call in &reply.tool_calls {
            if !text.is_empty() {
                text.push_str("\n\n");
            }
            text.push_str(&tool_call_markup(call));
        }
        text
    }

    fn call_model(
        &self,
        messages: &mut Vec<Message>,
        tools: &[serde_json::Value],
        acct: &mut Accounting,
    ) -> Result<ModelReply, CallFailure> {
        let policy = &self.config.policy;
        *messages = apply_eviction(messages, policy);
        let tokens = count_context(messages, policy);
        if tokens > policy.max_context_tokens {
            return Err(CallFailure::ContextBudget);
        }
        acct.peak_tokens = acct.peak_tokens.max(tokens);
        acct.peak_images = acct.peak_images.max(image_count(messages));

        let mut wire = Vec::with_capacity(messages.len());
        for m in messages.iter() {
            let mut images = Vec::with_capacity(m.images.len());
            for uid in &m.images {
                let asset = self.store.resolve(uid.as_str()).map_err(CallFailure::Store)?;
                images.push(ImagePayload {
                    uid: uid.clone(),
                    media_type: asset.meta.media_type,
                    bytes: asset.bytes,
                });
            }
            wire.push(ModelMessage {
                role: m.role,
                text: m.text.clone(),
                images,
            });
        }
        let request = ModelRequest { messages: &wire, tools };

        let retry = &self.config.retry;
        let mut last = None;
        for attempt in 0..retry.attempts.max(1) {
            if attempt > 0 && !retry.base_delay.is_zero() {
                std::thread::sleep(retry.base_delay * 2u32.saturating_pow(attempt - 1));
            }
            match self.model.complete(&request) {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    tracing::warn!(attempt = attempt + 1, error = %e, "model call failed");
                    last = Some(e);
                }
            }
        }
        Err(CallFailure::Model(last.expect("at least one attempt")))
    }
}

#[cfg(test)]
mod tests;
