//! Visual question synthesis.
//!
//! Single-hop questions come from a webpage: pick an unambiguous entity and
//! an image of it, then ask something only the image can answer. Multi-hop
//! questions grow an attribute graph around that entity, blur its outer
//! nodes into descriptions, and chain a sampled path back to the question.

pub mod compose;
pub mod error;
pub mod filter;
pub mod fuzz;
pub mod graph;
pub mod judge;
pub mod knowledge;
pub mod prompts;
pub mod rng;
pub mod sample;
pub mod seed;

pub use compose::{LeafImage, SynthesizedQuestion, compose_multihop, read_questions, resolve_leaf_image, write_questions};
pub use error::SynthError;
pub use filter::{DensityDepthFilter, FilterPolicy};
pub use fuzz::{FuzzReport, fuzzify};
pub use graph::{ExpansionRecord, GraphEdge, GraphNode, KnowledgeGraph, NodeId, NodeState};
pub use judge::{CandidateCountOracle, ChatJudge, IrreversibilityJudge, JudgeError, check_irreversibility};
pub use knowledge::{Attribute, FixtureSource, InMemorySource, KnowledgeSource, SourceError};
pub use prompts::Prompts;
pub use rng::SynthRng;
pub use sample::sample_subgraph;
pub use seed::{QuerySeed, extract_seed, synthesize_single_hop};
