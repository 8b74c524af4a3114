//! The irreversibility constraint: an attribute may join the graph only if
//! it does not by itself point back to the entity it came from.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use deepsearch_core::chat::ChatClient;

use crate::prompts::JUDGE_PROMPT;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
}

pub trait IrreversibilityJudge: Send + Sync {
    /// `Ok(true)` when `attribute` cannot identify `source_entity` on its own.
    fn irreversible(&self, attribute: &str, source_entity: &str) -> Result<bool, JudgeError>;
}

/// Fail-closed wrapper: judge errors reject the edge.
pub fn check_irreversibility(attribute: &str, source_entity: &str, judge: &dyn IrreversibilityJudge) -> bool {
    match judge.irreversible(attribute, source_entity) {
        Ok(v) => v,
        Err(e) => {
            tracing::warn!(%attribute, %source_entity, error = %e, "irreversibility check failed; rejecting edge");
            false
        }
    }
}

/// Offline judge: how many entities share each attribute text. Reversible
/// iff at most `threshold` (default 1) entities hold it.
#[derive(Debug, Clone, Default)]
pub struct CandidateCountOracle {
    pub counts: BTreeMap<String, u64>,
    pub threshold: u64,
}

impl CandidateCountOracle {
    pub fn new(counts: BTreeMap<String, u64>) -> Self {
        Self { counts, threshold: 1 }
    }

    /// Reads a `counts.json` object of attribute text to candidate count.
    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let raw = std::fs::read(path).map_err(|e| JudgeError::Unavailable(format!("{}: {e}", path.display())))?;
        let counts = serde_json::from_slice(&raw).map_err(|e| JudgeError::Unavailable(format!("{}: {e}", path.display())))?;
        Ok(Self::new(counts))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(&self.counts)?)
    }
}

impl IrreversibilityJudge for CandidateCountOracle {
    fn irreversible(&self, attribute: &str, _: &str) -> Result<bool, JudgeError> {
        self.counts
            .get(attribute)
            .map(|&n| n > self.threshold)
            .ok_or_else(|| JudgeError::Unavailable(format!("no candidate count for '{attribute}'")))
    }
}

/// Delegates the decision to a chat model.
pub struct ChatJudge {
    client: Arc<dyn ChatClient>,
    prompt: String,
}

impl ChatJudge {
    pub fn new(client: Arc<dyn ChatClient>) -> Self {
        Self {
            client,
            prompt: JUDGE_PROMPT.into(),
        }
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.prompt = prompt.into();
        self
    }
}

impl IrreversibilityJudge for ChatJudge {
    fn irreversible(&self, attribute: &str, source_entity: &str) -> Result<bool, JudgeError> {
        let user = format!("Entity: {source_entity}\nAttribute: {attribute}");
        let reply = self
            .client
            .chat(&self.prompt, &user)
            .map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        let word = reply
            .trim()
            .trim_start_matches(|c: char| !c.is_alphabetic())
            .split(|c: char| !c.is_alphabetic())
            .next()
            .unwrap_or_default()
            .to_ascii_uppercase();
        match word.as_str() {
            "IRREVERSIBLE" => Ok(true),
            "REVERSIBLE" => Ok(false),
            _ => Err(JudgeError::Unavailable(format!("unparseable verdict: {reply}"))),
        }
    }
}
