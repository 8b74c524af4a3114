//! Shared plumbing for the `deepsearch` binary: backend wiring for live and
//! replay modes, plus the benchmark harness.

pub mod eval;
pub mod runtime;

pub use eval::{BenchItem, EvalError, EvalRecord, Harness, scaling_curve, success_rate};
pub use runtime::{CliError, Runtime};
