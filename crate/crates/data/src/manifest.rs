use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLabel {
    pub task_id: String,
    pub source: String,
    pub gold_answer: String,
}

/// `manifest.json`: source labels in display order plus per-task gold answers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub sources: Vec<String>,
    #[serde(default)]
    pub tasks: Vec<TaskLabel>,
}

impl Manifest {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read(path)?;
        serde_json::from_slice(&raw).map_err(std::io::Error::other)
    }

    pub fn label(&self, task_id: &str) -> Option<&TaskLabel> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    /// Declared sources first, then any others seen in tasks.
    pub fn source_order(&self) -> Vec<String> {
        let mut out = self.sources.clone();
        for t in &self.tasks {
            if !out.contains(&t.source) {
                out.push(t.source.clone());
            }
        }
        out
    }
}
