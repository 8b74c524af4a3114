//! Text, image and reverse-image search over a pluggable backend.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Value, json};

use super::{Args, Tool, ToolError, ToolOutput};
use crate::fixture::{fixture_key, normalize_query};
use crate::store::{AssetId, AssetStore, GENERATED_SCHEME};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchHit {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchKind {
    Text,
    Image,
    Visual,
}

impl SearchKind {
    pub fn tool_name(self) -> &'static str {
        match self {
            Self::Text => "google_search",
            Self::Image => "image_search",
            Self::Visual => "visual_search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("search backend error: {0}")]
    Backend(String),
    #[error("no replay fixture for {tool} query '{query}'")]
    MissingFixture { tool: &'static str, query: String },
}

pub trait SearchBackend: Send + Sync {
    /// For [`SearchKind::Visual`] the query is the image reference.
    fn search(&self, kind: SearchKind, query: &str, top_k: usize) -> Result<Vec<SearchHit>, SearchError>;
}

/// Serper-style HTTP API: `/search`, `/images` and `/lens` endpoints,
/// authenticated with an `X-API-KEY` header.
pub struct SerperBackend {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl SerperBackend {
    pub const DEFAULT_BASE_URL: &'static str = "https://google.serper.dev";

    pub fn new(base_url: &str, api_key: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            agent,
        }
    }

    /// `SEARCH_API_KEY` is required; `SEARCH_API_URL` overrides the base URL.
    pub fn from_env() -> Option<Self> {
        let key = std::env::var("SEARCH_API_KEY").ok().filter(|k| !k.is_empty())?;
        let base = std::env::var("SEARCH_API_URL")
            .ok()
            .filter(|u| !u.is_empty())
            .unwrap_or_else(|| Self::DEFAULT_BASE_URL.to_string());
        Some(Self::new(&base, key))
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, SearchError> {
        let url = format!("{}/{path}", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .header("X-API-KEY", &self.api_key)
            .header("Content-Type", "application/json")
            .send(body.to_string().as_bytes())
            .map_err(|e| SearchError::Backend(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| SearchError::Backend(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(SearchError::Backend(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| SearchError::Backend(e.to_string()))
    }
}

fn str_field(v: &Value, key: &str) -> Option<String> {
    v.get(key).and_then(Value::as_str).map(str::to_string)
}

/// Maps a Serper response body onto hits.
pub(crate) fn parse_serper(kind: SearchKind, body: &Value) -> Vec<SearchHit> {
    let list = match kind {
        SearchKind::Text => "organic",
        SearchKind::Image => "images",
        SearchKind::Visual => "organic",
    };
    body.get(list)
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .map(|item| match kind {
                    SearchKind::Text => SearchHit {
                        title: str_field(item, "title").unwrap_or_default(),
                        link: str_field(item, "link"),
                        snippet: str_field(item, "snippet"),
                        ..SearchHit::default()
                    },
                    SearchKind::Image | SearchKind::Visual => SearchHit {
                        title: str_field(item, "title").unwrap_or_default(),
                        link: None,
                        snippet: None,
                        image_url: str_field(item, "imageUrl").or_else(|| str_field(item, "thumbnailUrl")),
                        source_url: str_field(item, "link").or_else(|| str_field(item, "source")),
                    },
                })
                .filter(|h| h.link.is_some() || h.image_url.is_some())
                .collect()
        })
        .unwrap_or_default()
}

impl SearchBackend for SerperBackend {
    fn search(&self, kind: SearchKind, query: &str, top_k: usize) -> Result<Vec<SearchHit>, SearchError> {
        let (path, body) = match kind {
            SearchKind::Text => ("search", json!({"q": query, "num": top_k})),
            SearchKind::Image => ("images", json!({"q": query, "num": top_k})),
            SearchKind::Visual => {
                if query.starts_with(GENERATED_SCHEME) {
                    return Err(SearchError::Backend(format!(
                        "{query} is a local asset; reverse image search needs a public image URL"
                    )));
                }
                ("lens", json!({"url": query}))
            }
        };
        let body = self.post(path, body)?;
        let mut hits = parse_serper(kind, &body);
        hits.truncate(top_k);
        Ok(hits)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReplayFile {
    Hits(Vec<SearchHit>),
    Wrapped { hits: Vec<SearchHit> },
}

/// Deterministic backend reading `<root>/search/<tool>/<query_hash>.json`.
#[derive(Debug, Clone)]
pub struct ReplaySearchBackend {
    root: PathBuf,
}

impl ReplaySearchBackend {
    pub fn new(fixture_dir: impl Into<PathBuf>) -> Self {
        Self {
            root: fixture_dir.into(),
        }
    }

    pub fn path_for(&self, kind: SearchKind, query: &str) -> PathBuf {
        self.root
            .join("search")
            .join(kind.tool_name())
            .join(format!("{}.json", fixture_key(&normalize_query(query))))
    }
}

impl SearchBackend for ReplaySearchBackend {
    fn search(&self, kind: SearchKind, query: &str, top_k: usize) -> Result<Vec<SearchHit>, SearchError> {
        let path = self.path_for(kind, query);
        let raw = fs::read(&path).map_err(|_| SearchError::MissingFixture {
            tool: kind.tool_name(),
            query: query.to_string(),
        })?;
        let file: ReplayFile = serde_json::from_slice(&raw)
            .map_err(|e| SearchError::Backend(format!("{}: {e}", path.display())))?;
        let mut hits = match file {
            ReplayFile::Hits(h) | ReplayFile::Wrapped { hits: h } => h,
        };
        hits.truncate(top_k);
        Ok(hits)
    }
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Numbered `"title" / "link" / "snippet"` entries.
pub fn render_text_hits(hits: &[SearchHit]) -> String {
    if hits.is_empty() {
        return "0 results".to_string();
    }
    hits.iter()
        .enumerate()
        .map(|(i, h)| {
            let mut line = format!("{}. \"title\": {}", i + 1, quoted(&h.title));
            if let Some(link) = h.link.as_ref().or(h.source_url.as_ref()) {
                line.push_str(&format!(", \"link\": {}", quoted(link)));
            }
            if let Some(snippet) = &h.snippet {
                line.push_str(&format!(", \"snippet\": {}", quoted(snippet)));
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Numbered `Title | Image URL | Source` triples.
pub fn render_image_hits(hits: &[SearchHit]) -> String {
    if hits.is_empty() {
        return "0 results".to_string();
    }
    hits.iter()
        .enumerate()
        .map(|(i, h)| {
            format!(
                "{}. | Title: {} | Image URL: {} | Source: {}",
                i + 1,
                h.title,
                h.image_url.as_deref().unwrap_or("(none)"),
                h.source_url.as_deref().or(h.link.as_deref()).unwrap_or("(none)"),
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn query_arg<'a>(args: &Args<'a>) -> Result<&'a str, ToolError> {
    let q = args.str(&["q", "query"])?;
    if q.trim().is_empty() {
        return Err(ToolError::InvalidArgument("empty query".into()));
    }
    Ok(q)
}

/// Registers every image URL lazily: known to the store, no bytes yet.
fn register_hits(store: &AssetStore, hits: &[SearchHit]) -> Vec<AssetId> {
    hits.iter()
        .filter_map(|h| {
            let url = h.image_url.as_deref()?;
            store.note_remote(url, Some(&h.title));
            match store.canonical(url) {
                Some(id) => Some(id),
                None => AssetId::new(url).ok(),
            }
        })
        .collect()
}

pub struct GoogleSearchTool {
    backend: Arc<dyn SearchBackend>,
    top_k: usize,
}

impl GoogleSearchTool {
    pub fn new(backend: Arc<dyn SearchBackend>, top_k: usize) -> Self {
        Self { backend, top_k }
    }
}

impl Tool for GoogleSearchTool {
    fn name(&self) -> &'static str {
        "google_search"
    }

    fn wire_name(&self) -> &'static str {
        "tool-google-search-google_search"
    }

    fn description(&self) -> &'static str {
        "Web search. Returns numbered results with title, link and snippet."
    }

    fn parameters(&self) -> Value {
        json!({
            "type": "object",
            "properties": {"q": {"type": "string", "description": "Search query"}},
            "required": ["q"]
        })
    }

    fn invoke(&self, args: &Args<'_>) -> Result<ToolOutput, ToolError> {
        let q = query_arg(args)?;
        let hits = self
            .backend
            .search(SearchKind::Text, q, self.top_k)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(ToolOutput::text(render_text_hits(&hits)))
    }
}

pub struct ImageSearchTool {
    backend: Arc<dyn SearchBackend>,
    store: Arc<AssetStore>,
    top_k: usize,
}

impl ImageSearchTool {
    pub fn new(backend: Arc<dyn SearchBackend>, store: Arc<AssetStore>, top_k: usize) -> Self {
        Self { backend, store, top_k }
    }
}

impl Tool for ImageSearchTool {
    fn name(&self) -> &'static str {
        "image_search"
    }

    fn wire_name(&self) -> &'static str {
        "tool-google-search-image_search"
    }

    fn description(&self) -> &'static str {
        "Image search by text. Returns image URLs with titles and source pages; \
         use fetch_image to look at one."
    }

    fn parameters(&self) -> Value {
        json!({
            "type": "object",
            "properties": {"q": {"type": "string", "description": "Search query"}},
            "required": ["q"]
        })
    }

    fn invoke(&self, args: &Args<'_>) -> Result<ToolOutput, ToolError> {
        let q = query_arg(args)?;
        let hits = self
            .backend
            .search(SearchKind::Image, q, self.top_k)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let referenced = register_hits(&self.store, &hits);
        Ok(ToolOutput {
            text: render_image_hits(&hits),
            materialized: Vec::new(),
            referenced,
        })
    }
}

pub struct VisualSearchTool {
    backend: Arc<dyn SearchBackend>,
    store: Arc<AssetStore>,
    top_k: usize,
}

impl VisualSearchTool {
    pub fn new(backend: Arc<dyn SearchBackend>, store: Arc<AssetStore>, top_k: usize) -> Self {
        Self { backend, store, top_k }
    }
}

fn is_http_url(s: &str) -> bool {
    url::Url::parse(s)
        .map(|u| u.has_host() && matches!(u.scheme(), "http" | "https"))
        .unwrap_or(false)
}

impl Tool for VisualSearchTool {
    fn name(&self) -> &'static str {
        "visual_search"
    }

    fn wire_name(&self) -> &'static str {
        "tool-google-search-visual_search"
    }

    fn description(&self) -> &'static str {
        "Reverse image search. Takes an image UID or URL and returns visually similar results."
    }

    fn parameters(&self) -> Value {
        json!({
            "type": "object",
            "properties": {"image_url": {"type": "string", "description": "Image UID or URL"}},
            "required": ["image_url"]
        })
    }

    fn invoke(&self, args: &Args<'_>) -> Result<ToolOutput, ToolError> {
        let image = args.str(&["image_url", "image", "uid", "url"])?;
        let reference = match self.store.canonical(image) {
            Some(id) => id.to_string(),
            None if self.store.is_known(image) || is_http_url(image) => image.to_string(),
            None => return Err(ToolError::Failed(format!("unknown image reference: {image}"))),
        };
        let hits = self
            .backend
            .search(SearchKind::Visual, &reference, self.top_k)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let referenced = register_hits(&self.store, &hits);
        Ok(ToolOutput {
            text: render_image_hits(&hits),
            materialized: Vec::new(),
            referenced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::{ToolCall, ToolRegistry};

    struct Fixed(Vec<SearchHit>);
    impl SearchBackend for Fixed {
        fn search(&self, _: SearchKind, _: &str, top_k: usize) -> Result<Vec<SearchHit>, SearchError> {
            Ok(self.0.iter().take(top_k).cloned().collect())
        }
    }

    struct Down;
    impl SearchBackend for Down {
        fn search(&self, _: SearchKind, _: &str, _: usize) -> Result<Vec<SearchHit>, SearchError> {
            Err(SearchError::Backend("HTTP 500".into()))
        }
    }

    fn hits() -> Vec<SearchHit> {
        vec![
            SearchHit {
                title: "China Times Group is sold to Want Want".into(),
                link: Some("https://www.taipeitimes.com/News/biz/1".into()),
                snippet: Some("It owns the Chinese-language newspapers China Times".into()),
                ..SearchHit::default()
            },
            SearchHit {
                title: "Second".into(),
                link: Some("https://b.example".into()),
                ..SearchHit::default()
            },
        ]
    }

    fn store() -> (tempfile::TempDir, Arc<AssetStore>) {
        let dir = tempfile::tempdir().unwrap();
        let s = Arc::new(AssetStore::open(dir.path()).unwrap());
        (dir, s)
    }

    #[test]
    fn text_rendering() {
        assert_eq!(
            render_text_hits(&hits()),
            "1. \"title\": \"China Times Group is sold to Want Want\", \"link\": \"https://www.taipeitimes.com/News/biz/1\", \"snippet\": \"It owns the Chinese-language newspapers China Times\"\n\
             2. \"title\": \"Second\", \"link\": \"https://b.example\""
        );
        assert_eq!(render_text_hits(&[]), "0 results");
    }

    #[test]
    fn top_k_truncates() {
        let r = ToolRegistry::new().register(Arc::new(GoogleSearchTool::new(Arc::new(Fixed(hits())), 1)));
        let res = r.dispatch(&ToolCall::new("google_search", json!({"q": "x"})), 1);
        assert_eq!(res.text.lines().count(), 1);
        assert!(res.text.starts_with("1. "));
        assert!(res.materialized_images.is_empty());
    }

    #[test]
    fn empty_query_and_backend_failure_are_errors() {
        let r = ToolRegistry::new()
            .register(Arc::new(GoogleSearchTool::new(Arc::new(Fixed(hits())), 10)));
        let res = r.dispatch(&ToolCall::new("google_search", json!({"q": "  "})), 1);
        assert!(res.is_error);
        assert_eq!(res.text, "empty query");

        let r = ToolRegistry::new().register(Arc::new(GoogleSearchTool::new(Arc::new(Down), 10)));
        let res = r.dispatch(&ToolCall::new("google_search", json!({"q": "x"})), 1);
        assert!(res.is_error);
        assert!(res.text.contains("HTTP 500"));
    }

    #[test]
    fn image_hits_registered_lazily() {
        let (_d, store) = store();
        let img_hits = vec![SearchHit {
            title: "poster".into(),
            image_url: Some("https://upload.wikimedia.org/wikipedia/commons/e/ee/x.jpg".into()),
            source_url: Some("https://zh.wikipedia.org/zh-tw/x".into()),
            ..SearchHit::default()
        }];
        let tool = ImageSearchTool::new(Arc::new(Fixed(img_hits)), store.clone(), 10);
        let r = ToolRegistry::new().register(Arc::new(tool));
        let res = r.dispatch(&ToolCall::new("tool-google-search-image_search", json!({"q": "x"})), 2);
        assert_eq!(
            res.text,
            "1. | Title: poster | Image URL: https://upload.wikimedia.org/wikipedia/commons/e/ee/x.jpg | Source: https://zh.wikipedia.org/zh-tw/x"
        );
        assert!(res.materialized_images.is_empty());
        assert_eq!(res.referenced_uids.len(), 1);
        let url = "https://upload.wikimedia.org/wikipedia/commons/e/ee/x.jpg";
        assert!(store.is_known(url));
        assert!(!store.contains(url));
    }

    #[test]
    fn visual_search_rejects_unknown_reference() {
        let (_d, store) = store();
        let r = ToolRegistry::new().register(Arc::new(VisualSearchTool::new(Arc::new(Fixed(vec![])), store, 10)));
        let res = r.dispatch(&ToolCall::new("visual_search", json!({"image_url": "not-registered"})), 1);
        assert!(res.is_error);
        assert!(res.text.contains("unknown image reference"));
        let res = r.dispatch(&ToolCall::new("visual_search", json!({"image_url": "https://x.example/a.png"})), 1);
        assert!(!res.is_error);
        assert_eq!(res.text, "0 results");
    }

    #[test]
    fn serper_parsing() {
        let text = json!({"organic": [{"title": "T", "link": "https://l", "snippet": "S"}, {"title": "no link"}]});
        let hits = parse_serper(SearchKind::Text, &text);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].snippet.as_deref(), Some("S"));

        let images = json!({"images": [{"title": "I", "imageUrl": "https://i/x.jpg", "link": "https://page"}]});
        let hits = parse_serper(SearchKind::Image, &images);
        assert_eq!(hits[0].image_url.as_deref(), Some("https://i/x.jpg"));
        assert_eq!(hits[0].source_url.as_deref(), Some("https://page"));

        let lens = json!({"organic": [{"title": "L", "source": "site", "link": "https://p", "thumbnailUrl": "https://t.jpg"}]});
        let hits = parse_serper(SearchKind::Visual, &lens);
        assert_eq!(hits[0].image_url.as_deref(), Some("https://t.jpg"));
    }

    #[test]
    fn replay_backend_reads_hashed_paths() {
        let dir = tempfile::tempdir().unwrap();
        let backend = ReplaySearchBackend::new(dir.path());
        let path = backend.path_for(SearchKind::Text, "Want Want acquired newspaper 2009");
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, serde_json::to_vec(&json!({"query": "q", "hits": hits()})).unwrap()).unwrap();
        let got = backend
            .search(SearchKind::Text, "  want want ACQUIRED newspaper 2009", 10)
            .unwrap();
        assert_eq!(got, hits());
        assert!(matches!(
            backend.search(SearchKind::Image, "other", 10),
            Err(SearchError::MissingFixture { .. })
        ));
    }
}
