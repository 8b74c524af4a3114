//! Single-hop questions from one webpage.

use deepsearch_core::AssetId;
use deepsearch_core::chat::ChatClient;
use deepsearch_core::fetch::PageFetcher;
use deepsearch_core::middleware::{DocMiddleware, SerializedDocument, render};
use serde::{Deserialize, Serialize};

use crate::compose::SynthesizedQuestion;
use crate::error::SynthError;
use crate::prompts::{Prompts, field, json_object};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySeed {
    pub webpage: SerializedDocument,
    pub core_entity: String,
    pub anchor_image: AssetId,
    pub clue: String,
    pub visual_question: String,
    /// Expected answer to the visual question.
    pub answer: String,
}

const IMAGE_WORDS: [&str; 6] = ["image", "photo", "picture", "poster", "figure", "shown"];

fn mentions_image(clue: &str, uid: &AssetId) -> bool {
    let lower = clue.to_lowercase();
    clue.contains(uid.as_str()) || IMAGE_WORDS.iter().any(|w| lower.contains(w))
}

/// Fetches and intercepts the page, then asks the extractor for an entity,
/// one of the page's images, a clue and a visual question.
pub fn extract_seed(
    page_url: &str,
    pages: &dyn PageFetcher,
    middleware: &DocMiddleware,
    extractor: &dyn ChatClient,
    prompts: &Prompts,
) -> Result<QuerySeed, SynthError> {
    let doc = pages.fetch_page(page_url)?;
    let webpage = middleware.intercept(&doc, None)?;
    if webpage.images.is_empty() {
        return Err(SynthError::NoQualifyingImage { url: page_url.into() });
    }
    let reply = extractor.chat(&prompts.extractor, &render(&webpage))?;
    let map = json_object(&reply).ok_or_else(|| SynthError::ExtractorRefusal(format!("unparseable reply: {reply}")))?;
    if let Some(reason) = field(&map, "refusal") {
        return Err(SynthError::ExtractorRefusal(reason.into()));
    }
    let get = |key: &str| {
        field(&map, key)
            .map(str::to_string)
            .ok_or_else(|| SynthError::ExtractorRefusal(format!("reply lacks '{key}'")))
    };
    let core_entity = get("entity")?;
    let image = get("image_uid")?;
    let anchor_image = webpage
        .images
        .iter()
        .map(|e| &e.uid)
        .find(|uid| uid.as_str() == image)
        .cloned()
        .ok_or_else(|| SynthError::NoQualifyingImage { url: page_url.into() })?;
    let clue = get("clue")?;
    if !clue.contains(&core_entity) || !mentions_image(&clue, &anchor_image) {
        return Err(SynthError::ExtractorRefusal(format!(
            "clue must name '{core_entity}' and refer to its image"
        )));
    }
    Ok(QuerySeed {
        webpage,
        core_entity,
        anchor_image,
        clue,
        visual_question: get("visual_question")?,
        answer: get("answer")?,
    })
}

/// Folds clue and visual question into one question q₀.
pub fn synthesize_single_hop(
    seed: &QuerySeed,
    composer: &dyn ChatClient,
    prompts: &Prompts,
) -> Result<SynthesizedQuestion, SynthError> {
    let user = format!(
        "Entity: {}\nClue: {}\nVisual question: {}",
        seed.core_entity, seed.clue, seed.visual_question
    );
    let reply = composer.chat(&prompts.single_hop, &user)?;
    let question = match json_object(&reply) {
        Some(map) => {
            if let Some(reason) = field(&map, "refusal") {
                return Err(SynthError::ComposerRefusal(reason.into()));
            }
            field(&map, "question").map(str::to_string)
        }
        None => Some(reply.trim().to_string()).filter(|s| !s.is_empty()),
    }
    .ok_or_else(|| SynthError::ComposerRefusal("empty question".into()))?;
    if !question.contains(&seed.core_entity) {
        return Err(SynthError::ComposerRefusal(format!(
            "question drops the clue entity '{}'",
            seed.core_entity
        )));
    }
    Ok(SynthesizedQuestion {
        question_text: question,
        answer: seed.answer.clone(),
        anchor_image: seed.anchor_image.clone(),
        input_images: Vec::new(),
        hop_count: 1,
        provenance: Vec::new(),
    })
}
