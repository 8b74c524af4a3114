//! Supervised fine-tuning records. Only assistant messages carry loss; tool
//! responses, prompts and questions are context.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use deepsearch_core::agent::Role;
use deepsearch_core::{AssetId, AssetStore, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftMessage {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<AssetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub task_id: String,
    pub source_dataset: String,
    pub messages: Vec<SftMessage>,
    pub loss_mask: Vec<bool>,
    /// Tool-use turns.
    pub turns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub content_hash: String,
    pub media_type: String,
    pub width: u32,
    pub height: u32,
}

/// Side-car of every image a batch of records points at.
pub type AssetsManifest = BTreeMap<AssetId, AssetEntry>;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{task_id}: image {uid} does not resolve")]
    DanglingUid { task_id: String, uid: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

/// Copies the trajectory's messages in order with their masks and collects
/// the images they carry.
pub fn export_sft(
    traj: &Trajectory,
    source_dataset: &str,
    store: &AssetStore,
) -> Result<(SftRecord, AssetsManifest), ExportError> {
    let mut assets = AssetsManifest::new();
    let mut messages = Vec::with_capacity(traj.messages.len());
    for m in &traj.messages {
        for uid in &m.images {
            let asset = store.resolve(uid.as_str()).map_err(|_| ExportError::DanglingUid {
                task_id: traj.task_id.clone(),
                uid: uid.to_string(),
            })?;
            assets.insert(
                uid.clone(),
                AssetEntry {
                    content_hash: asset.meta.content_hash,
                    media_type: asset.meta.media_type,
                    width: asset.meta.width,
                    height: asset.meta.height,
                },
            );
        }
        messages.push(SftMessage {
            role: m.role,
            text: m.text.clone(),
            images: m.images.clone(),
            tool_name: m.tool.as_ref().map(|t| t.tool_name.clone()),
        });
    }
    let loss_mask = messages.iter().map(|m| m.role == Role::Assistant).collect();
    let turns = messages.iter().filter(|m| m.role == Role::Tool).count();
    Ok((
        SftRecord {
            task_id: traj.task_id.clone(),
            source_dataset: source_dataset.to_string(),
            messages,
            loss_mask,
            turns,
        },
        assets,
    ))
}

pub fn write_sft(path: &Path, records: &[SftRecord]) -> Result<(), ExportError> {
    let io = |source| ExportError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut f, r).map_err(|e| io(e.into()))?;
        f.write_all(b"\n").map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_sft(path: &Path) -> Result<Vec<SftRecord>, ExportError> {
    let raw = std::fs::read_to_string(path).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| ExportError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })
        })
        .collect()
}
