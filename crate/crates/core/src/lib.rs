//! Runtime for a multimodal deep-search agent whose images live in a
//! file-backed store and appear in context only as textual UIDs.

pub mod agent;
pub mod chat;
pub mod fetch;
pub mod fixture;
pub mod imaging;
pub mod middleware;
pub mod store;
pub mod tools;

pub use agent::{Agent, AgentConfig, ContextPolicy, Message, Role, Termination, Trajectory};
pub use store::{AssetId, AssetStore, StoreError, VisualAsset};
pub use tools::{ToolCall, ToolRegistry, ToolResult};
