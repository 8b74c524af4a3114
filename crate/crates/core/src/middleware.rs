//! Intercepting document middleware.
//!
//! Raw web content never reaches the agent directly. [`DocMiddleware::intercept`]
//! registers every image of an interleaved document in the asset store, asks a
//! summarizer for bullet-point prose, and returns a [`SerializedDocument`]
//! whose [`render`]ing carries image UIDs instead of pixels.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chat::ChatClient;
use crate::fetch::ImageFetcher;
use crate::store::{AssetId, AssetStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterleavedDocument {
    pub source_url: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Text {
        text: String,
    },
    Image {
        image_url: String,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "b64_opt")]
        image_bytes: Option<Vec<u8>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        caption: Option<String>,
    },
}

impl InterleavedDocument {
    pub fn image_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Image { .. }))
            .count()
    }

    pub fn text(&self) -> String {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Text { text } => Some(text.as_str()),
                Segment::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub uid: AssetId,
    pub caption: Option<String>,
}

/// An image the middleware could not download or decode. It stays listed so
/// nothing disappears silently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedImage {
    pub url: String,
    pub caption: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedDocument {
    pub summary_text: String,
    pub images: Vec<ImageEntry>,
    #[serde(default)]
    pub failed_images: Vec<FailedImage>,
    pub source_url: String,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum MiddlewareError {
    #[error("summarizer unavailable: {0}")]
    SummarizerUnavailable(String),
}

pub trait Summarizer: Send + Sync {
    fn summarize(&self, text: &str, focus_query: Option<&str>) -> Result<String, MiddlewareError>;
}

/// Offline summarizer: the first `max_sentences` sentences as bullets.
#[derive(Debug, Clone)]
pub struct FallbackSummarizer {
    pub max_sentences: usize,
}

impl Default for FallbackSummarizer {
    fn default() -> Self {
        Self { max_sentences: 10 }
    }
}

pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let terminal = matches!(c, '。' | '！' | '？')
            || (matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()));
        if terminal || c == '\n' {
            let s = current.split_whitespace().collect::<Vec<_>>().join(" ");
            if !s.is_empty() {
                out.push(s);
            }
            current.clear();
        }
    }
    let s = current.split_whitespace().collect::<Vec<_>>().join(" ");
    if !s.is_empty() {
        out.push(s);
    }
    out
}

impl Summarizer for FallbackSummarizer {
    fn summarize(&self, text: &str, _focus_query: Option<&str>) -> Result<String, MiddlewareError> {
        Ok(split_sentences(text)
            .into_iter()
            .take(self.max_sentences)
            .map(|s| format!("- {s}"))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

pub const DEFAULT_SUMMARY_PROMPT: &str = "You summarize web pages for a research agent. \
Reply with concise bullet points (one per line, starting with \"- \"). \
Keep names, dates, numbers and any facts relevant to the extraction request.";

/// Summarizer backed by a chat-completions endpoint.
pub struct ChatSummarizer {
    client: Arc<dyn ChatClient>,
    system_prompt: String,
}

impl ChatSummarizer {
    pub fn new(client: Arc<dyn ChatClient>) -> Self {
        Self {
            client,
            system_prompt: DEFAULT_SUMMARY_PROMPT.to_string(),
        }
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.system_prompt = prompt.into();
        self
    }
}

impl Summarizer for ChatSummarizer {
    fn summarize(&self, text: &str, focus_query: Option<&str>) -> Result<String, MiddlewareError> {
        let user = match focus_query {
            Some(q) => format!("Information to extract: {q}\n\nPage content:\n{text}"),
            None => format!("Page content:\n{text}"),
        };
        self.client
            .chat(&self.system_prompt, &user)
            .map_err(|e| MiddlewareError::SummarizerUnavailable(e.to_string()))
    }
}

pub struct DocMiddleware {
    store: Arc<AssetStore>,
    images: Arc<dyn ImageFetcher>,
    summarizer: Arc<dyn Summarizer>,
}

impl DocMiddleware {
    pub fn new(store: Arc<AssetStore>, images: Arc<dyn ImageFetcher>, summarizer: Arc<dyn Summarizer>) -> Self {
        Self {
            store,
            images,
            summarizer,
        }
    }

    pub fn store(&self) -> &Arc<AssetStore> {
        &self.store
    }

    pub fn intercept(
        &self,
        doc: &InterleavedDocument,
        focus_query: Option<&str>,
    ) -> Result<SerializedDocument, MiddlewareError> {
        let mut images = Vec::new();
        let mut failed_images = Vec::new();
        for segment in &doc.segments {
            let Segment::Image {
                image_url,
                image_bytes,
                caption,
            } = segment
            else {
                continue;
            };
            let bytes = match image_bytes {
                Some(b) => Ok(b.clone()),
                None => match self.store.canonical(image_url) {
                    Some(uid) => {
                        images.push(ImageEntry {
                            uid,
                            caption: caption.clone(),
                        });
                        continue;
                    }
                    None => self.images.fetch_image(image_url).map_err(|e| e.to_string()),
                },
            };
            let registered = bytes.and_then(|b| {
                self.store
                    .register_asset(&b, Some(image_url), caption.as_deref())
                    .map_err(|e| e.to_string())
            });
            match registered {
                Ok(uid) => images.push(ImageEntry {
                    uid,
                    caption: caption.clone(),
                }),
                Err(reason) => {
                    tracing::debug!(url = %image_url, %reason, "image left unregistered");
                    failed_images.push(FailedImage {
                        url: image_url.clone(),
                        caption: caption.clone(),
                        reason,
                    })
                }
            }
        }
        let summary_text = self.summarizer.summarize(&doc.text(), focus_query)?;
        Ok(SerializedDocument {
            summary_text,
            images,
            failed_images,
            source_url: doc.source_url.clone(),
        })
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn caption_line(caption: Option<&str>) -> String {
    match caption.map(one_line).filter(|c| !c.is_empty()) {
        Some(c) => format!("  - **Caption**: {c}"),
        None => "  - **Caption**: (none)".to_string(),
    }
}

/// Lightweight text form of a document. Captions are flattened to one line.
pub fn render(doc: &SerializedDocument) -> String {
    let mut out = doc.summary_text.trim_end().to_string();
    if doc.images.is_empty() && doc.failed_images.is_empty() {
        return out;
    }
    if !out.is_empty() {
        out.push_str("\n\n");
    }
    out.push_str("### Images:");
    for img in &doc.images {
        out.push_str(&format!("\n- **Image URL**: {}\n", img.uid));
        out.push_str(&caption_line(img.caption.as_deref()));
    }
    for img in &doc.failed_images {
        out.push_str(&format!("\n- **Image URL**: {}\n", one_line(&img.url)));
        out.push_str(&caption_line(img.caption.as_deref()));
        out.push_str(&format!("\n  - **Fetch failed**: {}", one_line(&img.reason)));
    }
    out
}

mod b64_opt {
    use base64::Engine;
    use base64::engine::general_purpose::STANDARD;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_str(&STANDARD.encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| STANDARD.decode(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fetch::{FetchError, FixtureImageFetcher};
    use crate::imaging::synthetic_png;

    fn middleware(dir: &std::path::Path) -> DocMiddleware {
        let store = Arc::new(AssetStore::open(dir.join("store")).unwrap());
        DocMiddleware::new(
            store,
            Arc::new(FixtureImageFetcher::new(dir.join("images"))),
            Arc::new(FallbackSummarizer::default()),
        )
    }

    fn image(url: &str, seed: u32, caption: Option<&str>) -> Segment {
        Segment::Image {
            image_url: url.to_string(),
            image_bytes: Some(synthetic_png(8, 8, seed)),
            caption: caption.map(str::to_string),
        }
    }

    fn text(t: &str) -> Segment {
        Segment::Text { text: t.to_string() }
    }

    #[test]
    fn three_captioned_images_render_an_images_block() {
        let dir = tempfile::tempdir().unwrap();
        let mw = middleware(dir.path());
        let doc = InterleavedDocument {
            source_url: "https://en.wikipedia.org/wiki/Percy_Jackson".into(),
            segments: vec![
                text("Percy Jackson is a fictional character."),
                image("https://upload.wikimedia.org/a.jpg", 1, Some("Book cover")),
                text("He is a demigod."),
                image("https://upload.wikimedia.org/b.jpg", 2, Some("Film poster")),
                text("The series has five books."),
                image("https://upload.wikimedia.org/c.jpg", 3, Some("Author photo")),
            ],
        };
        let ser = mw.intercept(&doc, None).unwrap();
        let out = render(&ser);
        assert_eq!(
            out,
            "- Percy Jackson is a fictional character.\n- He is a demigod.\n- The series has five books.\n\n\
### Images:\n\
- **Image URL**: https://upload.wikimedia.org/a.jpg\n  - **Caption**: Book cover\n\
- **Image URL**: https://upload.wikimedia.org/b.jpg\n  - **Caption**: Film poster\n\
- **Image URL**: https://upload.wikimedia.org/c.jpg\n  - **Caption**: Author photo"
        );
        for entry in &ser.images {
            assert!(mw.store().contains(entry.uid.as_str()));
        }
    }

    #[test]
    fn no_images_means_no_heading() {
        let dir = tempfile::tempdir().unwrap();
        let mw = middleware(dir.path());
        let doc = InterleavedDocument {
            source_url: "https://x".into(),
            segments: vec![text("Only text here. Two sentences.")],
        };
        let ser = mw.intercept(&doc, Some("anything")).unwrap();
        assert!(ser.images.is_empty());
        assert_eq!(render(&ser), "- Only text here.\n- Two sentences.");
    }

    #[test]
    fn missing_caption_renders_none_marker() {
        let dir = tempfile::tempdir().unwrap();
        let mw = middleware(dir.path());
        let doc = InterleavedDocument {
            source_url: "https://x".into(),
            segments: vec![text("T."), image("https://img.example/1.png", 7, None)],
        };
        let out = render(&mw.intercept(&doc, None).unwrap());
        assert!(out.ends_with("- **Image URL**: https://img.example/1.png\n  - **Caption**: (none)"));
    }

    #[test]
    fn download_failure_is_annotated_not_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mw = middleware(dir.path());
        let doc = InterleavedDocument {
            source_url: "https://x".into(),
            segments: vec![Segment::Image {
                image_url: "https://img.example/missing.png".into(),
                image_bytes: None,
                caption: Some("gone".into()),
            }],
        };
        let ser = mw.intercept(&doc, None).unwrap();
        assert!(ser.images.is_empty());
        assert_eq!(ser.failed_images.len(), 1);
        let expected = FetchError::status(404, "https://img.example/missing.png").to_string();
        assert_eq!(ser.failed_images[0].reason, expected);
        assert!(render(&ser).contains("  - **Fetch failed**: Client error '404 Not Found'"));
    }

    #[test]
    fn summarizer_failure_surfaces() {
        struct Down;
        impl Summarizer for Down {
            fn summarize(&self, _: &str, _: Option<&str>) -> Result<String, MiddlewareError> {
                Err(MiddlewareError::SummarizerUnavailable("timeout".into()))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(AssetStore::open(dir.path()).unwrap());
        let mw = DocMiddleware::new(store, Arc::new(FixtureImageFetcher::new(dir.path())), Arc::new(Down));
        let doc = InterleavedDocument {
            source_url: "https://x".into(),
            segments: vec![text("a")],
        };
        assert!(matches!(mw.intercept(&doc, None), Err(MiddlewareError::SummarizerUnavailable(_))));
    }

    #[test]
    fn sentence_splitting_handles_cjk_and_abbrev_free_text() {
        assert_eq!(
            split_sentences("First one. Second!\nThird 3.5 stays? 中文句子。后面"),
            vec!["First one.", "Second!", "Third 3.5 stays?", "中文句子。", "后面"]
        );
    }

    #[test]
    fn fallback_caps_bullets() {
        let text = (0..15).map(|i| format!("Sentence {i}.")).collect::<Vec<_>>().join(" ");
        let s = FallbackSummarizer::default().summarize(&text, None).unwrap();
        assert_eq!(s.lines().count(), 10);
    }

    #[test]
    fn segment_json_shape() {
        let json = r#"{"kind":"image","image_url":"https://a/b.png","caption":"c"}"#;
        let seg: Segment = serde_json::from_str(json).unwrap();
        assert_eq!(
            seg,
            Segment::Image {
                image_url: "https://a/b.png".into(),
                image_bytes: None,
                caption: Some("c".into())
            }
        );
        assert_eq!(serde_json::to_string(&seg).unwrap(), json);
    }
}
