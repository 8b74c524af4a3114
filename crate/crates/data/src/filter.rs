use deepsearch_core::Trajectory;
use serde::{Deserialize, Serialize};

use crate::grader::Grader;

/// What counts as one interaction turn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnCount {
    /// Tool-role messages.
    #[default]
    ToolMessages,
    /// Model calls, as recorded in `turns_used`.
    ModelCalls,
}

/// Token usage is taken from the trajectory's recorded peak, i.e. under the
/// context policy the rollout ran with. Roll out with eviction disabled to
/// measure the full history instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCriteria {
    pub max_turns: usize,
    pub max_context_tokens: usize,
    pub require_success: bool,
    #[serde(default)]
    pub turn_count: TurnCount,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CriteriaError {
    #[error("filter bounds must be positive")]
    NonPositive,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            max_turns: 40,
            max_context_tokens: 64_000,
            require_success: true,
            turn_count: TurnCount::ToolMessages,
        }
    }
}

impl FilterCriteria {
    pub fn new(max_turns: usize, max_context_tokens: usize) -> Result<Self, CriteriaError> {
        if max_turns == 0 || max_context_tokens == 0 {
            return Err(CriteriaError::NonPositive);
        }
        Ok(Self {
            max_turns,
            max_context_tokens,
            ..Self::default()
        })
    }

    pub fn turns(&self, traj: &Trajectory) -> usize {
        match self.turn_count {
            TurnCount::ToolMessages => traj.tool_turns(),
            TurnCount::ModelCalls => traj.turns_used as usize,
        }
    }
}

pub fn rejection_filter(traj: &Trajectory, gold: &str, grader: &dyn Grader, criteria: &FilterCriteria) -> bool {
    let correct = !criteria.require_success
        || traj.final_answer.as_deref().is_some_and(|a| grader.grade(a, gold));
    correct && criteria.turns(traj) <= criteria.max_turns && traj.peak_context_tokens <= criteria.max_context_tokens
}
