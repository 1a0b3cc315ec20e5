//! Multi-hop path enumeration with hub, weak-relation and transitive pruning.
//!
//! A k-hop path is a chain of k triples where each tail is the next head.
//! Only simple paths are produced (no entity visited twice). Enumeration is a
//! streaming depth-first search starting from entities in lexicographic
//! order and following out-edges in insertion order.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Direction, KnowledgeGraph, Triple};

/// Longest supported path.
pub const MAX_HOPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("hop range {k_min}..={k_max} must satisfy 1 <= k_min <= k_max <= {MAX_HOPS}")]
    InvalidHopRange { k_min: usize, k_max: usize },
    #[error("transitive redundancy is defined only for paths of 2 or more hops")]
    TooShort,
    #[error("invalid pruning config: {0}")]
    InvalidConfig(String),
}

/// How high-degree hub entities are treated as path interiors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubPolicy {
    /// Hubs may start or end a path but never sit inside it.
    ExcludeIntermediate,
    /// Interior hubs multiply the path weight by `hub_multiplier`.
    Downweight,
    /// No hub treatment.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruningConfig {
    pub hub_fraction: f64,
    pub hub_policy: HubPolicy,
    pub hub_multiplier: f64,
    pub weak_relation_multiplier: f64,
    pub prune_transitive: bool,
}

impl Default for PruningConfig {
    fn default() -> Self {
        PruningConfig {
            hub_fraction: 0.01,
            hub_policy: HubPolicy::ExcludeIntermediate,
            hub_multiplier: 0.25,
            weak_relation_multiplier: 0.25,
            prune_transitive: true,
        }
    }
}

impl PruningConfig {
    /// Every path is emitted with weight 1.
    pub fn disabled() -> Self {
        PruningConfig {
            hub_policy: HubPolicy::Off,
            weak_relation_multiplier: 1.0,
            prune_transitive: false,
            ..PruningConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), PathError> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.hub_fraction) {
            return Err(PathError::InvalidConfig(format!(
                "hub_fraction {} not in (0, 1]",
                self.hub_fraction
            )));
        }
        if !unit(self.weak_relation_multiplier) || !unit(self.hub_multiplier) {
            return Err(PathError::InvalidConfig("multipliers must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// An ordered chain of triples `e0 -r1-> e1 -r2-> ... -rk-> ek`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub triples: Vec<Triple>,
    /// `e0..ek`, length `k + 1`.
    pub concepts: Vec<String>,
    pub weight: f64,
}

impl ReasoningPath {
    /// Builds a path from triples, checking the chaining invariant.
    pub fn from_triples(triples: Vec<Triple>) -> Option<Self> {
        let first = triples.first()?;
        let mut concepts = vec![first.head.clone()];
        for (i, t) in triples.iter().enumerate() {
            if i > 0 && t.head != triples[i - 1].tail {
                return None;
            }
            concepts.push(t.tail.clone());
        }
        Some(ReasoningPath {
            triples,
            concepts,
            weight: 1.0,
        })
    }

    pub fn hops(&self) -> usize {
        self.triples.len()
    }

    pub fn start(&self) -> &str {
        &self.concepts[0]
    }

    pub fn end(&self) -> &str {
        self.concepts.last().expect("path has at least one concept")
    }

    pub fn is_chained(&self) -> bool {
        self.triples.windows(2).all(|w| w[0].tail == w[1].head)
    }

    pub fn is_simple(&self) -> bool {
        let distinct: HashSet<&String> = self.concepts.iter().collect();
        distinct.len() == self.concepts.len()
    }
}

/// True iff the graph has a direct edge (any relation) from the path's first
/// entity to its last.
pub fn is_transitively_redundant(graph: &KnowledgeGraph, path: &ReasoningPath) -> Result<bool, PathError> {
    if path.hops() < 2 {
        return Err(PathError::TooShort);
    }
    Ok(graph.has_edge(path.start(), path.end()))
}

/// Product of the weak-relation multiplier over weak edges and, under the
/// downweight policy, the hub multiplier over interior hub entities.
pub fn path_weight(path: &ReasoningPath, cfg: &PruningConfig, hubs: &HashSet<String>) -> f64 {
    let mut weight = 1.0;
    for t in &path.triples {
        if t.relation.is_weak() {
            weight *= cfg.weak_relation_multiplier;
        }
    }
    if cfg.hub_policy == HubPolicy::Downweight && path.concepts.len() > 2 {
        for c in &path.concepts[1..path.concepts.len() - 1] {
            if hubs.contains(c) {
                weight *= cfg.hub_multiplier;
            }
        }
    }
    weight
}

/// Hub entity names under `cfg` (empty when the policy is off or the graph is empty).
pub fn hub_set(graph: &KnowledgeGraph, cfg: &PruningConfig) -> HashSet<String> {
    if cfg.hub_policy == HubPolicy::Off || graph.is_empty() {
        return HashSet::new();
    }
    graph
        .top_degree_hubs(cfg.hub_fraction)
        .map(|s| s.into_iter().collect())
        .unwrap_or_default()
}

struct Frame {
    node: usize,
    next_edge: usize,
}

/// Streaming DFS over surviving paths. Created by [`enumerate_paths`].
pub struct PathEnumerator<'g> {
    graph: &'g KnowledgeGraph,
    cfg: PruningConfig,
    k_min: usize,
    k_max: usize,
    hub_names: HashSet<String>,
    is_hub: Vec<bool>,
    direct: HashSet<(usize, usize)>,
    starts: Vec<usize>,
    next_start: usize,
    stack: Vec<Frame>,
    edges: Vec<usize>,
    on_path: Vec<bool>,
}

/// Enumerates every simple path with `k_min..=k_max` hops surviving pruning.
pub fn enumerate_paths<'g>(
    graph: &'g KnowledgeGraph,
    k_min: usize,
    k_max: usize,
    cfg: &PruningConfig,
) -> Result<PathEnumerator<'g>, PathError> {
    if k_min < 1 || k_min > k_max || k_max > MAX_HOPS {
        return Err(PathError::InvalidHopRange { k_min, k_max });
    }
    cfg.validate()?;
    let hub_names = hub_set(graph, cfg);
    let is_hub = (0..graph.node_count())
        .map(|i| hub_names.contains(graph.entity_name(i)))
        .collect();
    let direct = graph
        .triples()
        .iter()
        .map(|t| {
            (
                graph.entity_index(&t.head).expect("registered"),
                graph.entity_index(&t.tail).expect("registered"),
            )
        })
        .collect();
    let mut starts: Vec<usize> = (0..graph.node_count()).collect();
    starts.sort_by(|&a, &b| graph.entity_name(a).cmp(graph.entity_name(b)));
    Ok(PathEnumerator {
        graph,
        cfg: *cfg,
        k_min,
        k_max,
        hub_names,
        is_hub,
        direct,
        starts,
        next_start: 0,
        stack: Vec::new(),
        edges: Vec::new(),
        on_path: vec![false; graph.node_count()],
    })
}

impl PathEnumerator<'_> {
    pub fn hubs(&self) -> &HashSet<String> {
        &self.hub_names
    }

    fn build(&self) -> ReasoningPath {
        let triples = self.edges.iter().map(|&e| self.graph.triple(e).clone()).collect();
        let mut path = ReasoningPath::from_triples(triples).expect("DFS keeps paths chained");
        path.weight = path_weight(&path, &self.cfg, &self.hub_names);
        path
    }

    fn emits(&self) -> bool {
        let k = self.edges.len();
        if k < self.k_min {
            return false;
        }
        if self.cfg.prune_transitive && k >= 2 {
            let first = self.stack[0].node;
            let last = self.stack[k].node;
            if self.direct.contains(&(first, last)) {
                return false;
            }
        }
        true
    }
}

impl Iterator for PathEnumerator<'_> {
    type Item = ReasoningPath;

    fn next(&mut self) -> Option<ReasoningPath> {
        loop {
            let Some(top) = self.stack.last_mut() else {
                let &start = self.starts.get(self.next_start)?;
                self.next_start += 1;
                self.stack.push(Frame {
                    node: start,
                    next_edge: 0,
                });
                self.on_path[start] = true;
                continue;
            };
            let node = top.node;
            let out = self.graph.edge_indices(node, Direction::Out);
            let depth = self.edges.len();
            let interior_blocked =
                depth > 0 && self.cfg.hub_policy == HubPolicy::ExcludeIntermediate && self.is_hub[node];
            if depth == self.k_max || interior_blocked || top.next_edge >= out.len() {
                self.stack.pop();
                self.on_path[node] = false;
                self.edges.pop();
                continue;
            }
            let edge = out[top.next_edge];
            top.next_edge += 1;
            let tail = self
                .graph
                .entity_index(&self.graph.triple(edge).tail)
                .expect("registered");
            if self.on_path[tail] {
                continue;
            }
            self.on_path[tail] = true;
            self.edges.push(edge);
            self.stack.push(Frame {
                node: tail,
                next_edge: 0,
            });
            if self.emits() {
                return Some(self.build());
            }
        }
    }
}

/// Number of surviving paths per hop count.
pub fn count_paths(
    graph: &KnowledgeGraph,
    k_min: usize,
    k_max: usize,
    cfg: &PruningConfig,
) -> Result<BTreeMap<usize, usize>, PathError> {
    let mut counts: BTreeMap<usize, usize> = (k_min..=k_max).map(|k| (k, 0)).collect();
    for path in enumerate_paths(graph, k_min, k_max, cfg)? {
        *counts.entry(path.hops()).or_default() += 1;
    }
    Ok(counts)
}
