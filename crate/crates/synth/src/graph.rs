//! Attribute graph grown one node at a time.
//!
//! Each step picks an unexpanded node v, asks the knowledge source for its
//! attributes, keeps a filtered subset, and unions the surviving
//! `(v, relation, target)` triples into the graph. Targets that match an
//! existing entity by text reuse that node.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::filter::FilterPolicy;
use crate::judge::{IrreversibilityJudge, check_irreversibility};
use crate::knowledge::{Attribute, KnowledgeSource};
use crate::rng::SynthRng;

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeState {
    Unexpanded,
    Expanded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub node_id: NodeId,
    pub entity: String,
    pub state: NodeState,
    pub depth: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzzed_as: Option<String>,
    /// Set when fuzzification wanted this node but found no unused attribute.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fuzz_skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: NodeId,
    pub relation: String,
    pub to: NodeId,
    #[serde(default)]
    pub value_text: String,
    pub irreversibility_checked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    SelfLoop,
    /// Target already reaches the expanding node.
    Cycle,
    Reversible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub attribute: Attribute,
    pub reason: RejectReason,
}

/// What one expansion step saw and did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub node: NodeId,
    pub entity: String,
    /// Everything the source returned.
    pub candidates: Vec<Attribute>,
    /// Output of the filter policy.
    pub filtered: Vec<Attribute>,
    /// Subset of `filtered` unioned into the graph.
    pub retained: Vec<Attribute>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub nodes: BTreeMap<NodeId, GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub root_id: NodeId,
    pub rng: SynthRng,
    #[serde(default)]
    pub history: Vec<ExpansionRecord>,
    /// Leaf chosen for image replacement (sampled subgraphs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked_leaf: Option<NodeId>,
}

impl KnowledgeGraph {
    /// An isolated root node for `entity`.
    pub fn new(entity: impl Into<String>, seed: u64) -> Self {
        let root = GraphNode {
            node_id: 0,
            entity: entity.into(),
            state: NodeState::Unexpanded,
            depth: 0,
            fuzzed_as: None,
            fuzz_skipped: false,
        };
        Self {
            nodes: BTreeMap::from([(0, root)]),
            edges: Vec::new(),
            root_id: 0,
            rng: SynthRng::new(seed),
            history: Vec::new(),
            marked_leaf: None,
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng.seed()
    }

    pub fn root(&self) -> &GraphNode {
        &self.nodes[&self.root_id]
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.get(&id)
    }

    /// Node carrying this exact entity text.
    pub fn find(&self, entity: &str) -> Option<NodeId> {
        self.nodes.values().find(|n| n.entity == entity).map(|n| n.node_id)
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.edges.iter().filter(|e| e.from == id).count()
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.edges.iter().filter(|e| e.to == id).count()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.edges.iter().filter(|e| e.from == id || e.to == id).count()
    }

    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = self.edges.iter().filter(|e| e.from == id).map(|e| e.to).collect();
        set.into_iter().collect()
    }

    pub fn unexpanded(&self) -> Vec<NodeId> {
        self.nodes
            .values()
            .filter(|n| n.state == NodeState::Unexpanded)
            .map(|n| n.node_id)
            .collect()
    }

    pub fn expanded_count(&self) -> usize {
        self.nodes.values().filter(|n| n.state == NodeState::Expanded).count()
    }

    fn has_edge(&self, from: NodeId, relation: &str, to: NodeId) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to && e.relation == relation)
    }

    /// Whether `to` is reachable from `from` along edges (a node reaches itself).
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.edges.iter().filter(|e| e.from == n).map(|e| e.to));
            }
        }
        false
    }

    /// One expansion step. The chosen node is drawn uniformly from the
    /// unexpanded set with the graph's own generator.
    pub fn expand_step(
        &mut self,
        source: &dyn KnowledgeSource,
        selector: &dyn FilterPolicy,
        judge: &dyn IrreversibilityJudge,
    ) -> Result<&ExpansionRecord, SynthError> {
        let open = self.unexpanded();
        if open.is_empty() {
            return Err(SynthError::NoUnexpandedNode);
        }
        let v = open[self.rng.rng().random_range(0..open.len())];
        let entity = self.nodes[&v].entity.clone();
        let candidates = source.lookup(&entity)?;
        let filtered = selector.select(self, v, &candidates);

        let mut retained = Vec::new();
        let mut rejected = Vec::new();
        for attr in &filtered {
            let reason = if attr.target == entity {
                Some(RejectReason::SelfLoop)
            } else if self.find(&attr.target).is_some_and(|t| self.reaches(t, v)) {
                Some(RejectReason::Cycle)
            } else if !check_irreversibility(&attr.fact(), &entity, judge) {
                Some(RejectReason::Reversible)
            } else {
                None
            };
            match reason {
                Some(reason) => rejected.push(Rejection {
                    attribute: attr.clone(),
                    reason,
                }),
                None => {
                    self.union_edge(v, attr);
                    retained.push(attr.clone());
                }
            }
        }
        if let Some(node) = self.nodes.get_mut(&v) {
            node.state = NodeState::Expanded;
        }
        tracing::debug!(node = v, %entity, kept = retained.len(), "expanded");
        self.history.push(ExpansionRecord {
            node: v,
            entity,
            candidates,
            filtered,
            retained,
            rejected,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    fn union_edge(&mut self, from: NodeId, attr: &Attribute) {
        let to = match self.find(&attr.target) {
            Some(id) => id,
            None => {
                let id = self.nodes.keys().next_back().map_or(0, |k| k + 1);
                let depth = self.nodes[&from].depth + 1;
                self.nodes.insert(
                    id,
                    GraphNode {
                        node_id: id,
                        entity: attr.target.clone(),
                        state: NodeState::Unexpanded,
                        depth,
                        fuzzed_as: None,
                        fuzz_skipped: false,
                    },
                );
                id
            }
        };
        if !self.has_edge(from, &attr.relation, to) {
            self.edges.push(GraphEdge {
                from,
                relation: attr.relation.clone(),
                to,
                value_text: attr.value_text.clone(),
                irreversibility_checked: true,
            });
        }
    }

    /// Expands until nothing is left or `max_steps` is reached. Returns the
    /// number of steps taken.
    pub fn expand_all(
        &mut self,
        source: &dyn KnowledgeSource,
        selector: &dyn FilterPolicy,
        judge: &dyn IrreversibilityJudge,
        max_steps: usize,
    ) -> Result<usize, SynthError> {
        for step in 0..max_steps {
            match self.expand_step(source, selector, judge) {
                Ok(_) => {}
                Err(SynthError::NoUnexpandedNode) => return Ok(step),
                Err(e) => return Err(e),
            }
        }
        Ok(max_steps)
    }

    /// Structural problems, empty when the graph is sound.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut triples = BTreeSet::new();
        for e in &self.edges {
            if e.from == e.to {
                out.push(format!("self loop on {}", e.from));
            }
            if !self.nodes.contains_key(&e.from) || !self.nodes.contains_key(&e.to) {
                out.push(format!("dangling edge {} -> {}", e.from, e.to));
            }
            if !triples.insert((e.from, e.relation.as_str(), e.to)) {
                out.push(format!("duplicate edge {} -{}-> {}", e.from, e.relation, e.to));
            }
            if !e.irreversibility_checked {
                out.push(format!("unchecked edge {} -> {}", e.from, e.to));
            }
        }
        for n in self.nodes.values() {
            if n.node_id != self.root_id && self.in_degree(n.node_id) == 0 {
                out.push(format!("orphan node {}", n.node_id));
            }
            if n.state == NodeState::Unexpanded && self.out_degree(n.node_id) > 0 {
                out.push(format!("unexpanded node {} has children", n.node_id));
            }
        }
        if self.nodes[&self.root_id].depth != 0 {
            out.push("root depth is not 0".into());
        }
        for e in &self.edges {
            if self.reaches(e.to, e.from) {
                out.push(format!("cycle through {} -> {}", e.from, e.to));
                break;
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let json = serde_json::to_vec_pretty(self).map_err(|source| SynthError::Json {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, json).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let raw = std::fs::read(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_slice(&raw).map_err(|source| SynthError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}
