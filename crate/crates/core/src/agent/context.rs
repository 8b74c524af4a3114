//! Context accounting and the keep-recent-K eviction policy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::store::AssetId;

pub const DEFAULT_IMAGE_TOKENS: usize = 1024;

pub const DEFAULT_SUMMARY_PROMPT: &str = "Summarize the above conversation, and output the FINAL ANSWER to the original question. \
If a clear answer has already been provided earlier in the conversation, do not rethink or recalculate it — \
simply extract that answer and reformat it to match the required format below. \
If a definitive answer could not be determined, make a well-informed educated guess based on the conversation. \
Wrap the final answer in \\boxed{}.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// Bookkeeping carried by tool-role messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolMeta {
    pub turn_index: u32,
    pub tool_name: String,
    pub is_error: bool,
    /// UIDs the result referenced; survive eviction.
    pub uids: Vec<AssetId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    /// Assets whose pixels accompany this message when sent to the model.
    #[serde(default)]
    pub images: Vec<AssetId>,
    #[serde(default)]
    pub evicted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<ToolMeta>,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Self::plain(Role::System, text)
    }

    pub fn user(text: impl Into<String>, images: Vec<AssetId>) -> Self {
        Self {
            images,
            ..Self::plain(Role::User, text)
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, text)
    }

    pub fn tool(text: impl Into<String>, images: Vec<AssetId>, meta: ToolMeta) -> Self {
        Self {
            images,
            tool: Some(meta),
            ..Self::plain(Role::Tool, text)
        }
    }

    fn plain(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            text: text.into(),
            images: Vec::new(),
            evicted: false,
            tool: None,
        }
    }
}

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// ⌈characters / 4⌉, counted in Unicode scalar values.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharHeuristic;

impl TokenCounter for CharHeuristic {
    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }
}

#[derive(Clone)]
pub struct ContextPolicy {
    pub max_turns: u32,
    /// Number of most recent tool results kept in full; `None` disables eviction.
    pub keep_recent_k: Option<usize>,
    pub max_context_tokens: usize,
    pub image_tokens: usize,
    pub token_counter: Arc<dyn TokenCounter>,
    pub summary_prompt: String,
    /// When the model stops on its own without a boxed answer, ask it once
    /// more to summarize and box the answer (if turns remain).
    pub final_summary: bool,
}

impl std::fmt::Debug for ContextPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContextPolicy")
            .field("max_turns", &self.max_turns)
            .field("keep_recent_k", &self.keep_recent_k)
            .field("max_context_tokens", &self.max_context_tokens)
            .field("image_tokens", &self.image_tokens)
            .field("final_summary", &self.final_summary)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("max_turns must be at least 1")]
    ZeroTurns,
}

impl Default for ContextPolicy {
    fn default() -> Self {
        Self {
            max_turns: 30,
            keep_recent_k: Some(5),
            max_context_tokens: 128_000,
            image_tokens: DEFAULT_IMAGE_TOKENS,
            token_counter: Arc::new(CharHeuristic),
            summary_prompt: DEFAULT_SUMMARY_PROMPT.to_string(),
            final_summary: false,
        }
    }
}

impl ContextPolicy {
    pub fn new(max_turns: u32, keep_recent_k: Option<usize>, max_context_tokens: usize) -> Result<Self, PolicyError> {
        if max_turns == 0 {
            return Err(PolicyError::ZeroTurns);
        }
        Ok(Self {
            max_turns,
            keep_recent_k,
            max_context_tokens,
            ..Self::default()
        })
    }
}

pub fn placeholder_text(meta: &ToolMeta) -> String {
    let uids = if meta.uids.is_empty() {
        "(none)".to_string()
    } else {
        meta.uids.iter().map(AssetId::as_str).collect::<Vec<_>>().join(", ")
    };
    format!(
        "[Tool result evicted from context] turn {}, tool {}. UIDs: {uids}",
        meta.turn_index, meta.tool_name
    )
}

/// Keeps the `keep_recent_k` newest tool results intact and replaces older
/// ones with placeholders that still list every UID they referenced.
pub fn apply_eviction(messages: &[Message], policy: &ContextPolicy) -> Vec<Message> {
    let mut out = messages.to_vec();
    let Some(k) = policy.keep_recent_k else {
        return out;
    };
    let tool_positions: Vec<usize> = out
        .iter()
        .enumerate()
        .filter(|(_, m)| m.role == Role::Tool)
        .map(|(i, _)| i)
        .collect();
    let cutoff = tool_positions.len().saturating_sub(k);
    for &i in &tool_positions[..cutoff] {
        let msg = &mut out[i];
        if msg.evicted {
            continue;
        }
        let meta = msg.tool.clone().unwrap_or(ToolMeta {
            turn_index: 0,
            tool_name: "unknown".into(),
            is_error: false,
            uids: msg.images.clone(),
        });
        let mut uids = meta.uids.clone();
        for img in &msg.images {
            if !uids.contains(img) {
                uids.push(img.clone());
            }
        }
        let meta = ToolMeta { uids, ..meta };
        let placeholder = placeholder_text(&meta);
        // Short bodies that already carry every UID are cheaper than the
        // placeholder; keep them so eviction never grows the context.
        let keep_body = meta.uids.iter().all(|u| msg.text.contains(u.as_str()))
            && policy.token_counter.count(&msg.text) <= policy.token_counter.count(&placeholder);
        if !keep_body {
            msg.text = placeholder;
        }
        msg.images.clear();
        msg.evicted = true;
        msg.tool = Some(meta);
    }
    out
}

/// Tokens the messages occupy: counted text (placeholders included) plus a
/// fixed charge per attached image.
pub fn count_context(messages: &[Message], policy: &ContextPolicy) -> usize {
    messages
        .iter()
        .map(|m| policy.token_counter.count(&m.text) + m.images.len() * policy.image_tokens)
        .sum()
}

/// Attached images across the messages.
pub fn image_count(messages: &[Message]) -> usize {
    messages.iter().map(|m| m.images.len()).sum()
}
