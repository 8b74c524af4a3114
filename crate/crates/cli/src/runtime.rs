use std::path::{Path, PathBuf};
use std::sync::Arc;

use deepsearch_core::agent::{ModelClient, OpenAiModel, ScriptedModel};
use deepsearch_core::chat::{ChatClient, OpenAiCompatClient, ScriptedChat};
use deepsearch_core::fetch::{
    FixtureImageFetcher, FixturePageFetcher, HttpImageFetcher, HttpPageFetcher, ImageFetcher, PageFetcher,
};
use deepsearch_core::middleware::{ChatSummarizer, DocMiddleware, FallbackSummarizer, Summarizer};
use deepsearch_core::tools::{DEFAULT_TOP_K, ReplaySearchBackend, SearchBackend, SerperBackend, ToolEnv};
use deepsearch_core::{AssetStore, ToolRegistry};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or arguments; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Anything that went wrong while doing the work; exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn runtime(e: impl std::fmt::Display) -> Self {
        Self::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

/// Store, backends and the standard tool set. In replay mode everything is
/// read from a fixture directory laid out as `search/`, `pages/`,
/// `images/` and `model/`.
pub struct Runtime {
    pub store: Arc<AssetStore>,
    pub search: Arc<dyn SearchBackend>,
    pub pages: Arc<dyn PageFetcher>,
    pub images: Arc<dyn ImageFetcher>,
    pub middleware: Arc<DocMiddleware>,
    pub registry: Arc<ToolRegistry>,
    pub replay: Option<PathBuf>,
}

impl Runtime {
    pub fn open(store_dir: &Path, replay: Option<&Path>) -> Result<Self, CliError> {
        let store = Arc::new(AssetStore::open(store_dir).map_err(CliError::runtime)?);
        let (search, pages, images, summarizer): (
            Arc<dyn SearchBackend>,
            Arc<dyn PageFetcher>,
            Arc<dyn ImageFetcher>,
            Arc<dyn Summarizer>,
        ) = match replay {
            Some(dir) => {
                if !dir.is_dir() {
                    return Err(CliError::Usage(format!("replay directory {} does not exist", dir.display())));
                }
                (
                    Arc::new(ReplaySearchBackend::new(dir)),
                    Arc::new(FixturePageFetcher::new(dir.join("pages"))),
                    Arc::new(FixtureImageFetcher::new(dir.join("images"))),
                    Arc::new(FallbackSummarizer::default()),
                )
            }
            None => {
                let search = SerperBackend::from_env()
                    .ok_or_else(|| CliError::Runtime("SEARCH_API_KEY is not set (or pass --replay DIR)".into()))?;
                let summarizer: Arc<dyn Summarizer> =
                    match OpenAiCompatClient::from_env("SUMMARIZER_API_URL", "SUMMARIZER_API_KEY") {
                        Some(c) => Arc::new(ChatSummarizer::new(Arc::new(c))),
                        None => Arc::new(FallbackSummarizer::default()),
                    };
                (
                    Arc::new(search),
                    Arc::new(HttpPageFetcher::default()),
                    Arc::new(HttpImageFetcher::default()),
                    summarizer,
                )
            }
        };
        let middleware = Arc::new(DocMiddleware::new(store.clone(), images.clone(), summarizer));
        let registry = Arc::new(ToolRegistry::standard(ToolEnv {
            store: store.clone(),
            search: search.clone(),
            pages: pages.clone(),
            images: images.clone(),
            middleware: middleware.clone(),
            top_k: DEFAULT_TOP_K,
        }));
        Ok(Self {
            store,
            search,
            pages,
            images,
            middleware,
            registry,
            replay: replay.map(Path::to_path_buf),
        })
    }

    /// Scripted model for `task_id` in replay mode, the configured endpoint otherwise.
    pub fn model_for(&self, task_id: &str) -> Result<Arc<dyn ModelClient>, CliError> {
        match &self.replay {
            Some(dir) => Ok(Arc::new(ScriptedModel::from_fixture(dir, task_id).map_err(CliError::runtime)?)),
            None => live_model(),
        }
    }
}

pub fn live_model() -> Result<Arc<dyn ModelClient>, CliError> {
    OpenAiModel::from_env()
        .map(|m| Arc::new(m) as Arc<dyn ModelClient>)
        .ok_or_else(|| CliError::Runtime("MODEL_API_URL is not set (or pass --replay DIR)".into()))
}

/// Canned replies from a JSON list of strings, or the model endpoint.
pub fn chat_client(script: Option<&Path>) -> Result<Arc<dyn ChatClient>, CliError> {
    if let Some(path) = script {
        let raw = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let replies: Vec<String> =
            serde_json::from_slice(&raw).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        return Ok(Arc::new(ScriptedChat::new(replies)));
    }
    OpenAiCompatClient::from_env("MODEL_API_URL", "MODEL_API_KEY")
        .map(|c| Arc::new(c) as Arc<dyn ChatClient>)
        .ok_or_else(|| CliError::Runtime("MODEL_API_URL is not set (or pass --chat-script FILE)".into()))
}
