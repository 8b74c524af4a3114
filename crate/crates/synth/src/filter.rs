use crate::graph::{KnowledgeGraph, NodeId};
use crate::knowledge::Attribute;

/// Chooses which candidate attributes of a node are worth expanding.
pub trait FilterPolicy: Send + Sync {
    fn select(&self, graph: &KnowledgeGraph, node: NodeId, candidates: &[Attribute]) -> Vec<Attribute>;
}

/// Keeps at most `max_per_node` attributes and nothing that would sit deeper
/// than `max_depth`, preferring targets with the fewest existing edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DensityDepthFilter {
    pub max_per_node: usize,
    pub max_depth: u32,
}

impl Default for DensityDepthFilter {
    fn default() -> Self {
        Self {
            max_per_node: 3,
            max_depth: 3,
        }
    }
}

impl FilterPolicy for DensityDepthFilter {
    fn select(&self, graph: &KnowledgeGraph, node: NodeId, candidates: &[Attribute]) -> Vec<Attribute> {
        let Some(n) = graph.node(node) else {
            return Vec::new();
        };
        if n.depth >= self.max_depth {
            return Vec::new();
        }
        let mut unique: Vec<&Attribute> = Vec::new();
        for c in candidates {
            if !unique.contains(&c) {
                unique.push(c);
            }
        }
        // stable: ties keep source order
        unique.sort_by_key(|a| graph.find(&a.target).map_or(0, |id| graph.degree(id)));
        unique.into_iter().take(self.max_per_node).cloned().collect()
    }
}
