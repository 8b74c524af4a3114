/// Prompt templates for the synthesis models. The defaults are serviceable
/// placeholders; swap them for tuned wording in production runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    pub extractor: String,
    pub single_hop: String,
    pub multi_hop: String,
    pub judge: String,
}

pub const EXTRACTOR_PROMPT: &str = "You read a webpage rendered as text with an image list. \
Pick one unique, unambiguous entity the page is about, and one listed image related to it that has a direct caption or rich surrounding context. \
Write a clue sentence that names the entity and refers to that image, a question that can only be answered by looking at the image, and its answer. \
Reply with JSON only: {\"entity\": ..., \"image_uid\": ..., \"clue\": ..., \"visual_question\": ..., \"answer\": ...}. \
If no entity or image qualifies, reply {\"refusal\": \"<reason>\"}.";

pub const SINGLE_HOP_PROMPT: &str = "Combine the clue and the visual question into one self-contained question. \
Keep every distinguishing fact of the clue, including the entity name. \
Reply with JSON only: {\"question\": ...} or {\"refusal\": \"<reason>\"}.";

pub const MULTI_HOP_PROMPT: &str = "Turn the facts below into natural reasoning text that starts from the entity shown in the image \
and concludes by identifying the target entity, which you must call \"this entity\" and never name. \
Use the descriptions as given; do not reveal any entity name that was replaced by a description. \
Reply with JSON only: {\"reasoning\": ...} or {\"refusal\": \"<reason>\"}.";

pub const JUDGE_PROMPT: &str = "Decide whether the attribute alone is shared by many entities (IRREVERSIBLE) \
or points back to essentially one entity (REVERSIBLE). Answer with one word.";

impl Default for Prompts {
    fn default() -> Self {
        Self {
            extractor: EXTRACTOR_PROMPT.into(),
            single_hop: SINGLE_HOP_PROMPT.into(),
            multi_hop: MULTI_HOP_PROMPT.into(),
            judge: JUDGE_PROMPT.into(),
        }
    }
}

/// Pulls the JSON object out of a model reply, tolerating code fences and
/// chatter around it.
pub(crate) fn json_object(reply: &str) -> Option<serde_json::Map<String, serde_json::Value>> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    if end < start {
        return None;
    }
    match serde_json::from_str(&reply[start..=end]) {
        Ok(serde_json::Value::Object(map)) => Some(map),
        _ => None,
    }
}

pub(crate) fn field<'a>(map: &'a serde_json::Map<String, serde_json::Value>, key: &str) -> Option<&'a str> {
    map.get(key).and_then(|v| v.as_str()).map(str::trim).filter(|s| !s.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_json_is_found() {
        let m = json_object("sure:\n```json\n{\"question\": \"q?\"}\n```").unwrap();
        assert_eq!(field(&m, "question"), Some("q?"));
        assert!(json_object("no json here").is_none());
        assert!(json_object("} backwards {").is_none());
    }
}
