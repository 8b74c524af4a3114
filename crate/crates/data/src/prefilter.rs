use deepsearch_core::agent::{ImagePayload, ModelClient, ModelMessage, ModelRequest, Role, extract_final_answer, task_prompt};
use deepsearch_core::{AssetId, AssetStore};

use crate::grader::Grader;

pub const DIRECT_ANSWER_PROMPT: &str =
    "Answer the question directly from what you know and what you see. Wrap the final answer in \\boxed{}.";

/// Keeps a question unless the judge answers it correctly with tools off.
/// Any failure keeps it; later stages can still drop it.
pub fn prefilter_query(
    question: &str,
    images: &[AssetId],
    gold: &str,
    store: &AssetStore,
    judge: &dyn ModelClient,
    grader: &dyn Grader,
) -> bool {
    let mut payloads = Vec::with_capacity(images.len());
    for uid in images {
        match store.resolve(uid.as_str()) {
            Ok(asset) => payloads.push(ImagePayload {
                uid: uid.clone(),
                media_type: asset.meta.media_type.clone(),
                bytes: asset.bytes,
            }),
            Err(e) => {
                tracing::warn!(%uid, error = %e, "prefilter image missing; keeping question");
                return true;
            }
        }
    }
    let messages = [
        ModelMessage {
            role: Role::System,
            text: DIRECT_ANSWER_PROMPT.into(),
            images: Vec::new(),
        },
        ModelMessage {
            role: Role::User,
            text: task_prompt(question, images),
            images: payloads,
        },
    ];
    match judge.complete(&ModelRequest {
        messages: &messages,
        tools: &[],
    }) {
        Ok(reply) => match extract_final_answer(&reply.text) {
            Some(answer) => !grader.grade(&answer, gold),
            None => true,
        },
        Err(e) => {
            tracing::warn!(error = %e, "prefilter judge failed; keeping question");
            true
        }
    }
}
