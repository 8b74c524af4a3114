use std::collections::BTreeMap;

use deepsearch_core::agent::Role;
use serde::{Deserialize, Serialize};

use crate::sft::SftRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub count: usize,
    pub total_turns: usize,
    /// `None` for a source without records.
    pub mean_turns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total_records: usize,
    pub per_source: BTreeMap<String, SourceStats>,
    /// Tool-role messages per tool name.
    pub tool_histogram: BTreeMap<String, usize>,
    /// Records per tool-turn count.
    pub turn_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no records")]
    EmptyDataset,
}

pub fn compute_stats(records: &[SftRecord]) -> Result<DatasetStats, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptyDataset);
    }
    let mut per_source: BTreeMap<String, SourceStats> = BTreeMap::new();
    let mut tool_histogram = BTreeMap::new();
    let mut turn_histogram = BTreeMap::new();
    for r in records {
        let turns = r.messages.iter().filter(|m| m.role == Role::Tool).count();
        let s = per_source.entry(r.source_dataset.clone()).or_insert(SourceStats {
            count: 0,
            total_turns: 0,
            mean_turns: None,
        });
        s.count += 1;
        s.total_turns += turns;
        *turn_histogram.entry(turns).or_insert(0) += 1;
        for m in r.messages.iter().filter(|m| m.role == Role::Tool) {
            let name = m.tool_name.clone().unwrap_or_else(|| "unknown".into());
            *tool_histogram.entry(name).or_insert(0) += 1;
        }
    }
    for s in per_source.values_mut() {
        s.mean_turns = Some(s.total_turns as f64 / s.count as f64);
    }
    Ok(DatasetStats {
        total_records: records.len(),
        per_source,
        tool_histogram,
        turn_histogram,
    })
}

/// Two-row table, one column per source in the given order; sources
/// without records show 0 samples and "-".
pub fn render_table(stats: &DatasetStats, sources: &[String]) -> String {
    let mut header = vec!["Dataset".to_string()];
    let mut counts = vec!["Num. of Samples".to_string()];
    let mut turns = vec!["Avg. Turns".to_string()];
    for name in sources {
        let s = stats.per_source.get(name);
        header.push(name.clone());
        counts.push(s.map_or(0, |s| s.count).to_string());
        turns.push(s.and_then(|s| s.mean_turns).map_or("-".into(), |m| format!("{m:.2}")));
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|i| [&header, &counts, &turns].iter().map(|row| row[i].chars().count()).max().unwrap_or(0))
        .collect();
    let line = |row: &[String]| {
        row.iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-");
    format!("{}\n{rule}\n{}\n{}\n", line(&header), line(&counts), line(&turns))
}
