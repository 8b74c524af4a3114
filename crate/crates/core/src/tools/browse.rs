//! Browse tools: page scraping through the middleware, and `fetch_image`,
//! the only route by which retrieved pixels enter the model context.

use std::sync::Arc;

use serde_json::{Value, json};

use super::{Args, Tool, ToolError, ToolOutput};
use crate::fetch::{ImageFetcher, PageFetcher};
use crate::middleware::{DocMiddleware, render};
use crate::store::{AssetStore, StoreError};

pub struct ScrapeTool {
    pages: Arc<dyn PageFetcher>,
    middleware: Arc<DocMiddleware>,
}

impl ScrapeTool {
    pub fn new(pages: Arc<dyn PageFetcher>, middleware: Arc<DocMiddleware>) -> Self {
        Self { pages, middleware }
    }
}

fn scrape_failure(url: &str, error: String) -> ToolError {
    ToolError::Failed(
        json!({
            "success": false,
            "url": url,
            "extracted_info": "",
            "error": error,
        })
        .to_string(),
    )
}

impl Tool for ScrapeTool {
    fn name(&self) -> &'static str {
        "scrape_website"
    }

    fn wire_name(&self) -> &'static str {
        "jina_scrape_llm_summary-scrape_and_extract_info"
    }

    fn description(&self) -> &'static str {
        "Fetch a web page and summarize it, focusing on `info_to_extract`. \
         Images on the page are listed by URL with captions."
    }

    fn parameters(&self) -> Value {
        json!({
            "type": "object",
            "properties": {
                "url": {"type": "string", "description": "Page URL"},
                "info_to_extract": {"type": "string", "description": "What to look for on the page"}
            },
            "required": ["url"]
        })
    }

    fn invoke(&self, args: &Args<'_>) -> Result<ToolOutput, ToolError> {
        let url = args.str(&["url"])?;
        let focus = args.opt_str(&["info_to_extract", "focus", "query"])?;
        if url::Url::parse(url).map(|u| !u.has_host()).unwrap_or(true) {
            return Err(ToolError::InvalidArgument(format!("malformed url: {url}")));
        }
        let doc = self
            .pages
            .fetch_page(url)
            .map_err(|e| scrape_failure(url, format!("Scraping failed: {e}")))?;
        let serialized = self
            .middleware
            .intercept(&doc, focus)
            .map_err(|e| scrape_failure(url, e.to_string()))?;
        Ok(ToolOutput {
            text: render(&serialized),
            materialized: Vec::new(),
            referenced: serialized.images.iter().map(|i| i.uid.clone()).collect(),
        })
    }
}

pub struct FetchImageTool {
    store: Arc<AssetStore>,
    images: Arc<dyn ImageFetcher>,
}

impl FetchImageTool {
    pub fn new(store: Arc<AssetStore>, images: Arc<dyn ImageFetcher>) -> Self {
        Self { store, images }
    }
}

impl Tool for FetchImageTool {
    fn name(&self) -> &'static str {
        "fetch_image"
    }

    fn wire_name(&self) -> &'static str {
        "tool-fetch-image-fetch_image"
    }

    fn description(&self) -> &'static str {
        "Load the image behind a UID or URL into your view."
    }

    fn parameters(&self) -> Value {
        json!({
            "type": "object",
            "properties": {"url": {"type": "string", "description": "Image UID or URL"}},
            "required": ["url"]
        })
    }

    fn invoke(&self, args: &Args<'_>) -> Result<ToolOutput, ToolError> {
        let reference = args.str(&["url", "image_url", "uid"])?;
        let uid = match self.store.canonical(reference) {
            Some(uid) => uid,
            None => {
                let is_url = url::Url::parse(reference)
                    .map(|u| u.has_host() && matches!(u.scheme(), "http" | "https"))
                    .unwrap_or(false);
                if !is_url {
                    return Err(ToolError::Failed(format!("unknown image reference: {reference}")));
                }
                let bytes = self
                    .images
                    .fetch_image(reference)
                    .map_err(|e| ToolError::Failed(format!("failed to fetch image: {e}")))?;
                let caption = self.store.remote(reference).and_then(|r| r.caption);
                self.store
                    .register_asset(&bytes, Some(reference), caption.as_deref())
                    .map_err(|e| match e {
                        StoreError::UndecodableImage(m) => ToolError::Failed(format!("undecodable image: {m}")),
                        other => ToolError::Failed(other.to_string()),
                    })?
            }
        };
        Ok(ToolOutput {
            text: format!("Image downloaded from: {reference}"),
            materialized: vec![uid.clone()],
            referenced: vec![uid],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fetch::{FetchError, FixtureImageFetcher, FixturePageFetcher};
    use crate::imaging::synthetic_png;
    use crate::middleware::FallbackSummarizer;
    use crate::tools::{ToolCall, ToolRegistry};
    use parking_lot::Mutex;
    use std::fs;

    struct Counting {
        inner: FixtureImageFetcher,
        calls: Mutex<usize>,
    }
    impl ImageFetcher for Counting {
        fn fetch_image(&self, url: &str) -> Result<Vec<u8>, FetchError> {
            *self.calls.lock() += 1;
            self.inner.fetch_image(url)
        }
    }

    #[test]
    fn fetch_image_downloads_once_then_hits_store() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(AssetStore::open(dir.path().join("store")).unwrap());
        let fixtures = FixtureImageFetcher::new(dir.path().join("img"));
        fs::create_dir_all(dir.path().join("img")).unwrap();
        let url = "https://upload.wikimedia.org/wikipedia/commons/e/ee/poster.jpg";
        fs::write(fixtures.path_for(url), synthetic_png(10, 6, 3)).unwrap();
        let fetcher = Arc::new(Counting {
            inner: fixtures,
            calls: Mutex::new(0),
        });
        let r = ToolRegistry::new().register(Arc::new(FetchImageTool::new(store.clone(), fetcher.clone())));
        let call = ToolCall::new("tool-fetch-image-fetch_image", json!({"url": url}));
        let first = r.dispatch(&call, 8);
        assert!(!first.is_error, "{}", first.text);
        assert_eq!(first.text, format!("Image downloaded from: {url}"));
        assert_eq!(first.materialized_images[0].as_str(), url);
        let second = r.dispatch(&call, 9);
        assert_eq!(second.materialized_images, first.materialized_images);
        assert_eq!(*fetcher.calls.lock(), 1);
    }

    #[test]
    fn fetch_image_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(AssetStore::open(dir.path().join("store")).unwrap());
        let fixtures = FixtureImageFetcher::new(dir.path());
        fs::write(fixtures.path_for("https://x.example/page.png"), b"<html>not an image</html>").unwrap();
        let r = ToolRegistry::new().register(Arc::new(FetchImageTool::new(store, Arc::new(fixtures))));
        let res = r.dispatch(&ToolCall::new("fetch_image", json!({"url": "https://x.example/page.png"})), 1);
        assert!(res.is_error);
        assert!(res.text.starts_with("undecodable image"), "{}", res.text);
        assert!(res.materialized_images.is_empty());
        let res = r.dispatch(&ToolCall::new("fetch_image", json!({"url": "asset://sha256/nothing"})), 1);
        assert!(res.text.starts_with("unknown image reference"));
        let res = r.dispatch(&ToolCall::new("fetch_image", json!({"url": "https://x.example/404.png"})), 1);
        assert!(res.text.contains("404 Not Found"));
    }

    #[test]
    fn scrape_forbidden_embeds_transport_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(AssetStore::open(dir.path().join("store")).unwrap());
        let pages = FixturePageFetcher::new(dir.path());
        let url = "https://zh.wikipedia.org/zh-cn/blocked";
        fs::write(pages.path_for(url), json!({"source_url": url, "status": 403}).to_string()).unwrap();
        let mw = Arc::new(DocMiddleware::new(
            store,
            Arc::new(FixtureImageFetcher::new(dir.path())),
            Arc::new(FallbackSummarizer::default()),
        ));
        let r = ToolRegistry::new().register(Arc::new(ScrapeTool::new(Arc::new(pages), mw)));
        let res = r.dispatch(
            &ToolCall::new(
                "jina_scrape_llm_summary-scrape_and_extract_info",
                json!({"url": url, "info_to_extract": "count the trees"}),
            ),
            6,
        );
        assert!(res.is_error);
        assert!(res.text.contains("Client error '403 Forbidden'"), "{}", res.text);
        let parsed: Value = serde_json::from_str(&res.text).unwrap();
        assert_eq!(parsed["success"], false);
        let res = r.dispatch(&ToolCall::new("scrape_website", json!({"url": "nope"})), 7);
        assert!(res.text.starts_with("malformed url"));
    }
}
