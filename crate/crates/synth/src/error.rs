use deepsearch_core::StoreError;
use deepsearch_core::chat::ChatError;
use deepsearch_core::fetch::FetchError;
use deepsearch_core::middleware::MiddlewareError;

use crate::knowledge::SourceError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("no qualifying image on {url}")]
    NoQualifyingImage { url: String },
    #[error("extractor refused: {0}")]
    ExtractorRefusal(String),
    #[error("composer refused: {0}")]
    ComposerRefusal(String),
    #[error("no unexpanded node left")]
    NoUnexpandedNode,
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("no image found for leaf: {0}")]
    NoLeafImage(String),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Middleware(#[from] MiddlewareError),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}
