//! Multi-hop questions: a sampled subgraph becomes reasoning text that ends
//! at the core entity, spliced in front of the single-hop question.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use deepsearch_core::chat::ChatClient;
use deepsearch_core::fetch::ImageFetcher;
use deepsearch_core::tools::{SearchBackend, SearchKind};
use deepsearch_core::{AssetId, AssetStore};
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::graph::{GraphEdge, KnowledgeGraph, NodeId};
use crate::prompts::{Prompts, field, json_object};
use crate::seed::QuerySeed;

pub const IMAGE_PLACEHOLDER: &str = "the entity shown in the image";
pub const THIS_ENTITY: &str = "this entity";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesizedQuestion {
    pub question_text: String,
    pub answer: String,
    pub anchor_image: AssetId,
    /// Images handed to the solver alongside the text.
    #[serde(default)]
    pub input_images: Vec<AssetId>,
    pub hop_count: u32,
    /// Subgraph edges the question was built from.
    #[serde(default)]
    pub provenance: Vec<GraphEdge>,
}

/// How the replaced leaf's picture is obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeafImage {
    Asset(AssetId),
    /// Run an image search and take the first result that downloads.
    Query(String),
}

pub fn resolve_leaf_image(
    leaf: &LeafImage,
    store: &AssetStore,
    search: &dyn SearchBackend,
    images: &dyn ImageFetcher,
) -> Result<AssetId, SynthError> {
    match leaf {
        LeafImage::Asset(uid) => store
            .canonical(uid.as_str())
            .ok_or_else(|| SynthError::NoLeafImage(uid.to_string())),
        LeafImage::Query(q) => {
            let hits = search
                .search(SearchKind::Image, q, 10)
                .map_err(|e| SynthError::NoLeafImage(format!("{q}: {e}")))?;
            for url in hits.iter().filter_map(|h| h.image_url.as_deref()) {
                match images.fetch_image(url) {
                    Ok(bytes) => match store.register_asset(&bytes, Some(url), None) {
                        Ok(uid) => return Ok(uid),
                        Err(e) => tracing::debug!(%url, error = %e, "skipping leaf candidate"),
                    },
                    Err(e) => tracing::debug!(%url, error = %e, "skipping leaf candidate"),
                }
            }
            Err(SynthError::NoLeafImage(q.clone()))
        }
    }
}

/// Edges on the longest root-to-`target` path.
fn longest_path(graph: &KnowledgeGraph, target: NodeId) -> usize {
    fn go(g: &KnowledgeGraph, n: NodeId, target: NodeId, memo: &mut BTreeMap<NodeId, Option<usize>>) -> Option<usize> {
        if n == target {
            return Some(0);
        }
        if let Some(v) = memo.get(&n) {
            return *v;
        }
        memo.insert(n, None);
        let best = g.children(n).into_iter().filter_map(|c| go(g, c, target, memo)).max().map(|d| d + 1);
        memo.insert(n, best);
        best
    }
    go(graph, graph.root_id, target, &mut BTreeMap::new()).unwrap_or(0)
}

fn label(graph: &KnowledgeGraph, id: NodeId, leaf: Option<NodeId>) -> String {
    let n = &graph.nodes[&id];
    if id == graph.root_id {
        THIS_ENTITY.to_string()
    } else if Some(id) == leaf {
        IMAGE_PLACEHOLDER.to_string()
    } else {
        n.fuzzed_as.clone().unwrap_or_else(|| n.entity.clone())
    }
}

/// Entity names the final question must not contain.
fn hidden_names(seed: &QuerySeed, graph: &KnowledgeGraph, leaf: Option<NodeId>) -> Vec<String> {
    let mut out = vec![seed.core_entity.clone()];
    for n in graph.nodes.values() {
        if n.node_id != graph.root_id && (n.fuzzed_as.is_some() || Some(n.node_id) == leaf) {
            out.push(n.entity.clone());
        }
    }
    out
}

/// The reasoning text produced by the composer is prefixed to q₀ with the
/// core entity's name replaced by "this entity".
pub fn compose_multihop(
    seed: &QuerySeed,
    single_hop: &SynthesizedQuestion,
    subgraph: &KnowledgeGraph,
    leaf_image: &AssetId,
    composer: &dyn ChatClient,
    prompts: &Prompts,
) -> Result<SynthesizedQuestion, SynthError> {
    let leaf = subgraph.marked_leaf.filter(|&l| l != subgraph.root_id);
    let facts: Vec<String> = subgraph
        .edges
        .iter()
        .map(|e| {
            // value texts usually spell out the target, so hidden targets get the bare relation
            let hidden_target = Some(e.to) == leaf || subgraph.nodes[&e.to].fuzzed_as.is_some();
            let fact = if e.value_text.is_empty() || hidden_target {
                e.relation.clone()
            } else {
                e.value_text.clone()
            };
            format!(
                "- {} | {} | {}",
                label(subgraph, e.from, leaf),
                fact,
                label(subgraph, e.to, leaf)
            )
        })
        .collect();
    let user = format!("Image: {leaf_image}\nFacts:\n{}", facts.join("\n"));
    let reply = composer.chat(&prompts.multi_hop, &user)?;
    let reasoning = match json_object(&reply) {
        Some(map) => {
            if let Some(reason) = field(&map, "refusal") {
                return Err(SynthError::ComposerRefusal(reason.into()));
            }
            field(&map, "reasoning").map(str::to_string)
        }
        None => Some(reply.trim().to_string()).filter(|s| !s.is_empty()),
    }
    .ok_or_else(|| SynthError::ComposerRefusal("empty reasoning".into()))?;

    let tail = single_hop.question_text.replace(&seed.core_entity, THIS_ENTITY);
    let question_text = format!("{reasoning} {tail}");
    let lowered = question_text.to_lowercase();
    if let Some(name) = hidden_names(seed, subgraph, leaf)
        .into_iter()
        .find(|n| lowered.contains(&n.to_lowercase()))
    {
        return Err(SynthError::ComposerRefusal(format!("composed question reveals '{name}'")));
    }
    let hops = leaf.map_or(0, |l| longest_path(subgraph, l));
    Ok(SynthesizedQuestion {
        question_text,
        answer: single_hop.answer.clone(),
        anchor_image: single_hop.anchor_image.clone(),
        input_images: vec![leaf_image.clone()],
        hop_count: hops as u32 + 1,
        provenance: subgraph.edges.clone(),
    })
}

/// Appends records to a `questions.jsonl` file.
pub fn write_questions(path: &Path, questions: &[SynthesizedQuestion]) -> Result<(), SynthError> {
    let io = |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    for q in questions {
        let line = serde_json::to_string(q).map_err(|source| SynthError::Json {
            path: path.display().to_string(),
            source,
        })?;
        writeln!(f, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn read_questions(path: &Path) -> Result<Vec<SynthesizedQuestion>, SynthError> {
    let raw = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| SynthError::Json {
                path: path.display().to_string(),
                source,
            })
        })
        .collect()
}
