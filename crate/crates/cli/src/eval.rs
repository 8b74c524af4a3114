//! Benchmark runs and the success-within-N-turns curve.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::sync::atomic::{AtomicUsize, Ordering};

use deepsearch_core::agent::{AgentConfig, ModelClient};
use deepsearch_core::fetch::ImageFetcher;
use deepsearch_core::{Agent, AssetId, AssetStore, Termination, ToolRegistry};
use deepsearch_data::Grader;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchItem {
    pub item_id: String,
    pub question: String,
    #[serde(default)]
    pub input_image_urls: Vec<String>,
    pub gold_answer: String,
    #[serde(default)]
    pub benchmark_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    pub final_answer: Option<String>,
    pub correct: bool,
    pub turns_used: u32,
    pub terminated_by: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("benchmark has no items")]
    EmptyBenchmark,
    #[error("{path}: {message}")]
    BadFile { path: String, message: String },
}

/// Builds the model for one item; scripted replays need one per item.
pub type ModelFactory<'a> = dyn Fn(&BenchItem) -> Result<Arc<dyn ModelClient>, String> + Sync + 'a;

pub struct Harness<'a> {
    pub registry: Arc<ToolRegistry>,
    pub store: Arc<AssetStore>,
    pub images: Arc<dyn ImageFetcher>,
    pub config: AgentConfig,
    pub grader: &'a dyn Grader,
    pub parallel: usize,
}

fn failed(item: &BenchItem, message: String) -> EvalRecord {
    EvalRecord {
        item_id: item.item_id.clone(),
        final_answer: None,
        correct: false,
        turns_used: 0,
        terminated_by: Termination::Error,
        error: Some(message),
    }
}

/// Registers an item's input images, fetching those the store lacks.
pub fn ingest_images(store: &AssetStore, images: &dyn ImageFetcher, urls: &[String]) -> Result<Vec<AssetId>, String> {
    urls.iter()
        .map(|url| match store.canonical(url) {
            Some(uid) => Ok(uid),
            None => {
                let bytes = images.fetch_image(url).map_err(|e| format!("input image {url}: {e}"))?;
                store
                    .register_asset(&bytes, Some(url), Some("Original input image"))
                    .map_err(|e| format!("input image {url}: {e}"))
            }
        })
        .collect()
}

impl Harness<'_> {
    fn run_one(&self, item: &BenchItem, models: &ModelFactory<'_>) -> EvalRecord {
        let model = match models(item) {
            Ok(m) => m,
            Err(e) => return failed(item, e),
        };
        let inputs = match ingest_images(&self.store, self.images.as_ref(), &item.input_image_urls) {
            Ok(v) => v,
            Err(e) => return failed(item, e),
        };
        let agent = Agent::new(model, self.registry.clone(), self.store.clone(), self.config.clone());
        match agent.run_task(&item.item_id, &item.question, &inputs) {
            Ok(t) => {
                let correct = t
                    .final_answer
                    .as_deref()
                    .is_some_and(|a| self.grader.grade(a, &item.gold_answer));
                EvalRecord {
                    item_id: item.item_id.clone(),
                    final_answer: t.final_answer,
                    correct,
                    turns_used: t.turns_used,
                    terminated_by: t.terminated_by,
                    error: t.error,
                }
            }
            Err(e) => failed(item, e.to_string()),
        }
    }

    /// One run per item, up to `parallel` at a time. Records come back in
    /// item order; a failing item never stops the sweep.
    pub fn run_benchmark(&self, items: &[BenchItem], models: &ModelFactory<'_>) -> Result<Vec<EvalRecord>, EvalError> {
        if items.is_empty() {
            return Err(EvalError::EmptyBenchmark);
        }
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<EvalRecord>> = vec![None; items.len()];
        let workers = self.parallel.clamp(1, items.len());
        let results: Vec<Vec<(usize, EvalRecord)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            let Some(item) = items.get(i) else { break };
                            tracing::info!(item = %item.item_id, "running");
                            done.push((i, self.run_one(item, models)));
                        }
                        done
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for (i, r) in results.into_iter().flatten() {
            slots[i] = Some(r);
        }
        Ok(slots.into_iter().map(|r| r.expect("every item ran")).collect())
    }
}

/// Percentage of correct records.
pub fn success_rate(records: &[EvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64 * 100.0
}

/// Share of records (in percent) that terminated on their own with a
/// correct answer within N turns, for each threshold N.
pub fn scaling_curve(records: &[EvalRecord], thresholds: &[u32]) -> BTreeMap<u32, f64> {
    let mut turns: Vec<u32> = records
        .iter()
        .filter(|r| r.correct && r.terminated_by == Termination::SelfTerminated)
        .map(|r| r.turns_used)
        .collect();
    turns.sort_unstable();
    thresholds
        .iter()
        .map(|&n| {
            let hits = turns.partition_point(|&t| t <= n);
            let acc = if records.is_empty() {
                0.0
            } else {
                hits as f64 / records.len() as f64 * 100.0
            };
            (n, acc)
        })
        .collect()
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EvalError> {
    let bad = |message: String| EvalError::BadFile {
        path: path.display().to_string(),
        message,
    };
    let raw = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn read_items(path: &Path) -> Result<Vec<BenchItem>, EvalError> {
    let items: Vec<BenchItem> = read_jsonl(path)?;
    if let Some(bad) = items.iter().find(|i| i.question.trim().is_empty()) {
        return Err(EvalError::BadFile {
            path: path.display().to_string(),
            message: format!("item {} has an empty question", bad.item_id),
        });
    }
    Ok(items)
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    read_jsonl(path)
}

pub fn records_jsonl(records: &[EvalRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}
