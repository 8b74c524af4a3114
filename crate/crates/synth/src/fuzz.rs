//! Replaces weakly connected entities with a description built from an
//! attribute the graph has not used yet.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{KnowledgeGraph, NodeId};
use crate::knowledge::{Attribute, KnowledgeSource};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub fuzzed: Vec<NodeId>,
    /// Candidates with no unused attribute (or an unreadable source entry).
    pub skipped: Vec<NodeId>,
}

pub fn describe(attr: &Attribute) -> String {
    if attr.value_text.is_empty() {
        format!("the entity whose {} is {}", attr.relation, attr.target)
    } else {
        format!("the entity that {}", attr.value_text)
    }
}

/// Fuzzes every non-root node that is a leaf or has total degree at most
/// `degree_threshold`. Nodes already fuzzed are left alone.
pub fn fuzzify(graph: &mut KnowledgeGraph, source: &dyn KnowledgeSource, degree_threshold: usize) -> FuzzReport {
    let mut report = FuzzReport::default();
    let ids: Vec<NodeId> = graph.nodes.keys().copied().collect();
    for id in ids {
        if id == graph.root_id || graph.nodes[&id].fuzzed_as.is_some() {
            continue;
        }
        if graph.out_degree(id) > 0 && graph.degree(id) > degree_threshold {
            continue;
        }
        let entity = graph.nodes[&id].entity.clone();
        let used: BTreeSet<&str> = graph
            .edges
            .iter()
            .filter(|e| e.from == id || e.to == id)
            .map(|e| e.relation.as_str())
            .collect();
        let lowered = entity.to_lowercase();
        let unused: Vec<Attribute> = match source.lookup(&entity) {
            Ok(attrs) => attrs
                .into_iter()
                .filter(|a| !used.contains(a.relation.as_str()))
                .filter(|a| !describe(a).to_lowercase().contains(&lowered))
                .collect(),
            Err(e) => {
                tracing::warn!(%entity, error = %e, "cannot fuzz node");
                Vec::new()
            }
        };
        let node_rng = graph.rng.rng();
        let node = graph.nodes.get_mut(&id).expect("listed above");
        if unused.is_empty() {
            node.fuzz_skipped = true;
            report.skipped.push(id);
        } else {
            let pick = &unused[node_rng.random_range(0..unused.len())];
            node.fuzzed_as = Some(describe(pick));
            node.fuzz_skipped = false;
            report.fuzzed.push(id);
        }
    }
    report
}
