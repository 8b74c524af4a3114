use std::collections::BTreeSet;

use rand::Rng;

use crate::graph::{KnowledgeGraph, NodeId};

/// Samples a connected subgraph around the root: a random walk of at most
/// `max_hops` edges, plus each side branch off the walk with probability
/// one half. The walk's end is marked as the leaf to show as an image.
///
/// Draws from, and advances, the source graph's generator; the subgraph
/// carries a copy of the advanced state.
pub fn sample_subgraph(graph: &mut KnowledgeGraph, max_hops: usize) -> KnowledgeGraph {
    let mut path = vec![graph.root_id];
    let mut cur = graph.root_id;
    for _ in 0..max_hops {
        let children: Vec<NodeId> = graph.children(cur).into_iter().filter(|c| !path.contains(c)).collect();
        if children.is_empty() {
            break;
        }
        cur = children[graph.rng.rng().random_range(0..children.len())];
        path.push(cur);
    }

    let mut keep_nodes: BTreeSet<NodeId> = path.iter().copied().collect();
    let mut keep_edges: BTreeSet<usize> = BTreeSet::new();
    for pair in path.windows(2) {
        let idx = graph
            .edges
            .iter()
            .position(|e| e.from == pair[0] && e.to == pair[1])
            .expect("walk follows edges");
        keep_edges.insert(idx);
    }
    for &on_path in &path[..path.len() - 1] {
        for (idx, e) in graph.edges.iter().enumerate() {
            if e.from != on_path || keep_nodes.contains(&e.to) {
                continue;
            }
            if graph.rng.rng().random_bool(0.5) {
                keep_nodes.insert(e.to);
                keep_edges.insert(idx);
            }
        }
    }

    KnowledgeGraph {
        nodes: graph
            .nodes
            .iter()
            .filter(|(id, _)| keep_nodes.contains(id))
            .map(|(id, n)| (*id, n.clone()))
            .collect(),
        edges: keep_edges.iter().map(|&i| graph.edges[i].clone()).collect(),
        root_id: graph.root_id,
        rng: graph.rng.clone(),
        history: Vec::new(),
        marked_leaf: Some(cur),
    }
}
