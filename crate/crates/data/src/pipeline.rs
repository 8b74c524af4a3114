//! File-level glue: `trajectories.jsonl` + `manifest.json` in,
//! `sft.jsonl` + `assets_manifest.json` out.

use std::path::Path;

use deepsearch_core::{AssetStore, Trajectory};
use serde::{Deserialize, Serialize};

use crate::filter::{FilterCriteria, rejection_filter};
use crate::grader::Grader;
use crate::manifest::Manifest;
use crate::sft::{AssetsManifest, ExportError, SftRecord, export_sft, write_sft};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub kept: usize,
    pub rejected: usize,
    /// Trajectories without a manifest entry.
    pub unlabeled: usize,
    /// Records abandoned because an image no longer resolves.
    pub dangling: Vec<String>,
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, ExportError> {
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

/// Filters and exports; returns the kept records alongside a summary.
pub fn export_dataset(
    trajectories: &[Trajectory],
    manifest: &Manifest,
    store: &AssetStore,
    grader: &dyn Grader,
    criteria: &FilterCriteria,
    out_dir: &Path,
) -> Result<(Vec<SftRecord>, ExportSummary), ExportError> {
    let mut summary = ExportSummary::default();
    let mut records = Vec::new();
    let mut assets = AssetsManifest::new();
    for t in trajectories {
        let Some(label) = manifest.label(&t.task_id) else {
            summary.unlabeled += 1;
            continue;
        };
        if !rejection_filter(t, &label.gold_answer, grader, criteria) {
            summary.rejected += 1;
            continue;
        }
        match export_sft(t, &label.source, store) {
            Ok((record, a)) => {
                assets.extend(a);
                records.push(record);
                summary.kept += 1;
            }
            Err(ExportError::DanglingUid { task_id, uid }) => {
                tracing::warn!(%task_id, %uid, "dropping record with dangling image");
                summary.dangling.push(task_id);
            }
            Err(e) => return Err(e),
        }
    }
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ExportError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    write_sft(&out_dir.join("sft.jsonl"), &records)?;
    let assets_path = out_dir.join("assets_manifest.json");
    let json = serde_json::to_vec_pretty(&assets).map_err(|e| io(&assets_path)(e.into()))?;
    std::fs::write(&assets_path, json).map_err(io(&assets_path))?;
    Ok((records, summary))
}
