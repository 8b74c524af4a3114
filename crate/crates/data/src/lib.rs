//! Turns agent rollouts into training data: drop questions a model answers
//! without search, keep only correct trajectories inside the turn and
//! context limits, export them with loss masks, and summarize the result.

pub mod filter;
pub mod grader;
pub mod manifest;
pub mod pipeline;
pub mod prefilter;
pub mod sft;
pub mod stats;

pub use filter::{CriteriaError, FilterCriteria, TurnCount, rejection_filter};
pub use grader::{ChatGrader, Grader, NormalizedMatch, normalize_answer};
pub use manifest::{Manifest, TaskLabel};
pub use pipeline::{ExportSummary, export_dataset, read_trajectories};
pub use prefilter::prefilter_query;
pub use sft::{AssetEntry, AssetsManifest, ExportError, SftMessage, SftRecord, export_sft, read_sft, write_sft};
pub use stats::{DatasetStats, SourceStats, StatsError, compute_stats, render_table};
