//! Page and image retrieval behind swappable live and fixture backends.

use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use scraper::{ElementRef, Html, Selector};
use serde::Deserialize;

use crate::fixture::fixture_key;
use crate::middleware::{InterleavedDocument, Segment};

const USER_AGENT: &str = concat!("deepsearch/", env!("CARGO_PKG_VERSION"));
const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("{} '{status} {reason}' for url '{url}'", if *.status >= 500 { "Server error" } else { "Client error" })]
    Status { status: u16, reason: String, url: String },
    #[error("transport error for url '{url}': {message}")]
    Transport { url: String, message: String },
    #[error("no fixture for '{0}'")]
    MissingFixture(String),
    #[error("malformed fixture {path}: {message}")]
    BadFixture { path: String, message: String },
}

impl FetchError {
    pub fn status(status: u16, url: &str) -> Self {
        let reason = ureq::http::StatusCode::from_u16(status)
            .ok()
            .and_then(|s| s.canonical_reason())
            .unwrap_or("Unknown")
            .to_string();
        Self::Status {
            status,
            reason,
            url: url.to_string(),
        }
    }
}

pub trait PageFetcher: Send + Sync {
    fn fetch_page(&self, url: &str) -> Result<InterleavedDocument, FetchError>;
}

pub trait ImageFetcher: Send + Sync {
    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, FetchError>;
}

fn http_agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(60)))
        .user_agent(USER_AGENT)
        .build()
        .into()
}

fn get_bytes(agent: &ureq::Agent, url: &str) -> Result<Vec<u8>, FetchError> {
    match agent.get(url).call() {
        Ok(mut resp) => resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
            .map_err(|e| FetchError::Transport {
                url: url.to_string(),
                message: e.to_string(),
            }),
        Err(ureq::Error::StatusCode(code)) => Err(FetchError::status(code, url)),
        Err(e) => Err(FetchError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        }),
    }
}

/// Downloads pages over HTTP and splits the HTML into text and image segments.
pub struct HttpPageFetcher {
    agent: ureq::Agent,
}

impl Default for HttpPageFetcher {
    fn default() -> Self {
        Self { agent: http_agent() }
    }
}

impl PageFetcher for HttpPageFetcher {
    fn fetch_page(&self, url: &str) -> Result<InterleavedDocument, FetchError> {
        let body = get_bytes(&self.agent, url)?;
        Ok(parse_html(url, &String::from_utf8_lossy(&body)))
    }
}

pub struct HttpImageFetcher {
    agent: ureq::Agent,
}

impl Default for HttpImageFetcher {
    fn default() -> Self {
        Self { agent: http_agent() }
    }
}

impl ImageFetcher for HttpImageFetcher {
    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        get_bytes(&self.agent, url)
    }
}

fn element_text(el: ElementRef<'_>) -> String {
    el.text().collect::<Vec<_>>().join(" ").split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Extracts headings, paragraphs, list items and `<img>` elements in document
/// order. Image captions come from `alt` or the enclosing `<figcaption>`.
pub fn parse_html(page_url: &str, html: &str) -> InterleavedDocument {
    let doc = Html::parse_document(html);
    let sel = Selector::parse("h1, h2, h3, h4, h5, h6, p, li, img").expect("static selector");
    let figcaption = Selector::parse("figcaption").expect("static selector");
    let base = url::Url::parse(page_url).ok();

    let mut segments = Vec::new();
    for el in doc.select(&sel) {
        let name = el.value().name();
        if name == "img" {
            let Some(src) = el.value().attr("src") else { continue };
            let resolved = match &base {
                Some(b) => b.join(src).map(|u| u.to_string()).unwrap_or_else(|_| src.to_string()),
                None => src.to_string(),
            };
            if resolved.starts_with("data:") {
                continue;
            }
            let figure_caption = el
                .ancestors()
                .filter_map(ElementRef::wrap)
                .find(|a| a.value().name() == "figure")
                .and_then(|fig| fig.select(&figcaption).next())
                .map(element_text)
                .filter(|s| !s.is_empty());
            let alt = el
                .value()
                .attr("alt")
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty());
            segments.push(Segment::Image {
                image_url: resolved,
                image_bytes: None,
                caption: figure_caption.or(alt),
            });
            continue;
        }
        let nested = el
            .ancestors()
            .filter_map(ElementRef::wrap)
            .any(|a| matches!(a.value().name(), "p" | "li"));
        if nested {
            continue;
        }
        let text = element_text(el);
        if !text.is_empty() {
            segments.push(Segment::Text { text });
        }
    }
    InterleavedDocument {
        source_url: page_url.to_string(),
        segments,
    }
}

#[derive(Debug, Deserialize)]
struct PageFixture {
    source_url: String,
    #[serde(default)]
    segments: Vec<Segment>,
    #[serde(default)]
    status: Option<u16>,
}

/// Reads `<root>/<url_hash>.json` page records. A record with a non-2xx
/// `status` replays as the corresponding HTTP error.
#[derive(Debug, Clone)]
pub struct FixturePageFetcher {
    root: PathBuf,
}

impl FixturePageFetcher {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_for(&self, url: &str) -> PathBuf {
        self.root.join(format!("{}.json", fixture_key(url)))
    }
}

impl PageFetcher for FixturePageFetcher {
    fn fetch_page(&self, url: &str) -> Result<InterleavedDocument, FetchError> {
        let path = self.path_for(url);
        let raw = fs::read(&path).map_err(|_| FetchError::MissingFixture(url.to_string()))?;
        let page: PageFixture = serde_json::from_slice(&raw).map_err(|e| FetchError::BadFixture {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if let Some(status) = page.status.filter(|s| !(200..300).contains(s)) {
            return Err(FetchError::status(status, url));
        }
        Ok(InterleavedDocument {
            source_url: page.source_url,
            segments: page.segments,
        })
    }
}

/// Reads raw image payloads from `<root>/<url_hash>`.
#[derive(Debug, Clone)]
pub struct FixtureImageFetcher {
    root: PathBuf,
}

impl FixtureImageFetcher {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_for(&self, url: &str) -> PathBuf {
        self.root.join(fixture_key(url))
    }
}

impl ImageFetcher for FixtureImageFetcher {
    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        fs::read(self.path_for(url)).map_err(|_| FetchError::status(404, url))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_error_text_matches_client_error_shape() {
        let e = FetchError::status(403, "https://zh.wikipedia.org/zh-cn/x");
        assert_eq!(
            e.to_string(),
            "Client error '403 Forbidden' for url 'https://zh.wikipedia.org/zh-cn/x'"
        );
        assert!(FetchError::status(502, "u").to_string().starts_with("Server error '502 Bad Gateway'"));
    }

    #[test]
    fn html_parsing_keeps_order_and_captions() {
        let html = r#"<html><body>
            <h1>Percy Jackson</h1>
            <p>A series of <b>novels</b>.</p>
            <figure><img src="/img/cover.jpg" alt="alt text"><figcaption>First cover</figcaption></figure>
            <p>More text.</p>
            <img src="https://cdn.example/b.png" alt="Second">
            <img src="data:image/png;base64,AAAA">
            <ul><li><p>nested</p></li></ul>
        </body></html>"#;
        let doc = parse_html("https://example.org/wiki/page", html);
        let kinds: Vec<String> = doc
            .segments
            .iter()
            .map(|s| match s {
                Segment::Text { text } => format!("T:{text}"),
                Segment::Image { image_url, caption, .. } => {
                    format!("I:{image_url}|{}", caption.clone().unwrap_or_default())
                }
            })
            .collect();
        assert_eq!(
            kinds,
            vec![
                "T:Percy Jackson",
                "T:A series of novels .",
                "I:https://example.org/img/cover.jpg|First cover",
                "T:More text.",
                "I:https://cdn.example/b.png|Second",
                "T:nested",
            ]
        );
    }

    #[test]
    fn fixture_page_with_error_status() {
        let dir = tempfile::tempdir().unwrap();
        let f = FixturePageFetcher::new(dir.path());
        let url = "https://zh.wikipedia.org/zh-cn/blocked";
        fs::write(
            f.path_for(url),
            format!(r#"{{"source_url": "{url}", "status": 403}}"#),
        )
        .unwrap();
        let err = f.fetch_page(url).unwrap_err();
        assert!(err.to_string().contains("403 Forbidden"));
        assert!(matches!(f.fetch_page("https://other"), Err(FetchError::MissingFixture(_))));
    }
}
