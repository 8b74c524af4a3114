//! Parsing of assistant turns: tool-call markup and final answers.

use serde_json::Value;

use crate::tools::ToolCall;

pub const TOOL_CALL_OPEN: &str = "<tool_call>";
pub const TOOL_CALL_CLOSE: &str = "</tool_call>";

/// Renders a call the way it appears inside assistant turns.
pub fn tool_call_markup(call: &ToolCall) -> String {
    let body = serde_json::json!({"name": call.name, "arguments": call.arguments});
    format!("{TOOL_CALL_OPEN}\n{body}\n{TOOL_CALL_CLOSE}")
}

pub fn contains_tool_call(text: &str) -> bool {
    text.contains(TOOL_CALL_OPEN)
}

/// Every `<tool_call>...</tool_call>` block in order. Unparseable blocks come
/// back as `Err` with the raw body.
pub fn parse_tool_calls(text: &str) -> Vec<Result<ToolCall, String>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(TOOL_CALL_OPEN) {
        let after = &rest[start + TOOL_CALL_OPEN.len()..];
        let (body, next) = match after.find(TOOL_CALL_CLOSE) {
            Some(end) => (&after[..end], &after[end + TOOL_CALL_CLOSE.len()..]),
            None => (after, ""),
        };
        let parsed = serde_json::from_str::<Value>(body.trim())
            .ok()
            .and_then(|v| serde_json::from_value::<ToolCall>(v).ok())
            .ok_or_else(|| body.trim().to_string());
        out.push(parsed);
        rest = next;
    }
    out
}

/// Content of the last `boxed{...}` marker (with or without a leading
/// backslash), honoring nested braces.
pub fn boxed_answer(text: &str) -> Option<String> {
    let start = text.rfind("boxed{")? + "boxed{".len();
    let mut depth = 1usize;
    for (i, c) in text[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(text[start..start + i].trim().to_string());
                }
            }
            _ => {}
        }
    }
    None
}

fn strip_think(text: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some(start) = rest.find("<think>") {
        out.push_str(&rest[..start]);
        match rest[start..].find("</think>") {
            Some(end) => rest = &rest[start + end + "</think>".len()..],
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// The answer carried by an assistant turn: a terminal `boxed{}` marker if
/// present; otherwise the visible text of a turn without tool calls.
pub fn extract_final_answer(assistant_text: &str) -> Option<String> {
    if let Some(ans) = boxed_answer(assistant_text) {
        return Some(ans);
    }
    if contains_tool_call(assistant_text) {
        return None;
    }
    let visible = strip_think(assistant_text);
    let visible = visible.trim();
    if visible.is_empty() {
        let whole = assistant_text.trim();
        return (!whole.is_empty()).then(|| whole.to_string());
    }
    Some(visible.to_string())
}
