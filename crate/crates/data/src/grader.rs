use std::sync::Arc;

use deepsearch_core::chat::ChatClient;

pub trait Grader: Send + Sync {
    fn grade(&self, answer: &str, gold: &str) -> bool;
}

/// Lowercased, whitespace collapsed, surrounding quotes and trailing
/// punctuation removed.
pub fn normalize_answer(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '“' | '”'))
        .trim_end_matches(['.', '。', '!', '?'])
        .trim()
        .to_string()
}

fn as_number(s: &str) -> Option<f64> {
    let cleaned: String = s.chars().filter(|c| *c != ',' && *c != '_').collect();
    cleaned.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Normalized exact match, then numeric equality ("5" = "5.0" = "5.00").
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizedMatch;

impl Grader for NormalizedMatch {
    fn grade(&self, answer: &str, gold: &str) -> bool {
        let (a, g) = (normalize_answer(answer), normalize_answer(gold));
        if a == g {
            return true;
        }
        match (as_number(&a), as_number(&g)) {
            (Some(x), Some(y)) => x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()),
            _ => false,
        }
    }
}

pub const GRADER_PROMPT: &str = "You compare a predicted answer with the gold answer. \
Reply CORRECT if they mean the same thing, otherwise INCORRECT.";

/// Model-judged equivalence. Errors and unclear verdicts grade as wrong.
pub struct ChatGrader {
    client: Arc<dyn ChatClient>,
}

impl ChatGrader {
    pub fn new(client: Arc<dyn ChatClient>) -> Self {
        Self { client }
    }
}

impl Grader for ChatGrader {
    fn grade(&self, answer: &str, gold: &str) -> bool {
        let user = format!("Gold answer: {gold}\nPredicted answer: {answer}");
        match self.client.chat(GRADER_PROMPT, &user) {
            Ok(reply) => reply.trim().to_ascii_uppercase().starts_with("CORRECT"),
            Err(e) => {
                tracing::warn!(error = %e, "grader unavailable");
                false
            }
        }
    }
}
