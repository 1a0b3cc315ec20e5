//! Typed knowledge-graph store.
//!
//! A [`GraphBuilder`] collects triples under vocabulary and duplicate checks;
//! [`GraphBuilder::freeze`] produces an immutable [`KnowledgeGraph`] with
//! derived in/out adjacency. Entity identity is the normalized name.

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::map::Entry;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::vocab::{EntityCategory, RelationType};

pub use io::{fingerprint, load_jsonl, read_jsonl, save_jsonl, write_jsonl, GraphLine};

/// Canonical entity key: lowercase, internal whitespace collapsed, leading and
/// trailing punctuation stripped.
pub fn normalize_entity(name: &str) -> String {
    let collapsed = name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

/// Extraction confidence: 7 = central, 5 = supporting, 3 = brief mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Strength(u8);

impl Strength {
    pub const BRIEF: Strength = Strength(3);
    pub const SUPPORTING: Strength = Strength(5);
    pub const CENTRAL: Strength = Strength(7);

    pub fn new(value: u8) -> Result<Self, GraphError> {
        match value {
            3 | 5 | 7 => Ok(Strength(value)),
            other => Err(GraphError::InvalidStrength(other)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Strength {
    type Error = GraphError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Strength::new(value)
    }
}

impl From<Strength> for u8 {
    fn from(s: Strength) -> u8 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripleStatus {
    Candidate,
    Validated,
    Rejected,
}

/// A directed, typed fact `head --relation--> tail`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub head_category: EntityCategory,
    pub relation: RelationType,
    pub tail: String,
    pub tail_category: EntityCategory,
    /// Source ids: text-unit ids, or `expansion` for proposed triples.
    #[serde(deserialize_with = "io::one_or_many")]
    pub provenance: Vec<String>,
    pub strength: Strength,
    pub status: TripleStatus,
}

impl Triple {
    /// Builds a triple with normalized endpoint names.
    pub fn new(
        head: &str,
        head_category: EntityCategory,
        relation: RelationType,
        tail: &str,
        tail_category: EntityCategory,
    ) -> Result<Self, GraphError> {
        let head = normalize_entity(head);
        let tail = normalize_entity(tail);
        if head.is_empty() || tail.is_empty() {
            return Err(GraphError::EmptyEntity);
        }
        Ok(Triple {
            head,
            head_category,
            relation,
            tail,
            tail_category,
            provenance: Vec::new(),
            strength: Strength::SUPPORTING,
            status: TripleStatus::Candidate,
        })
    }

    /// Builds a triple from untyped strings, checking vocabulary and categories.
    pub fn parse(
        head: &str,
        head_category: &str,
        relation: &str,
        tail: &str,
        tail_category: &str,
    ) -> Result<Self, GraphError> {
        let relation: RelationType = relation.parse()?;
        Triple::new(head, head_category.parse()?, relation, tail, tail_category.parse()?)
    }

    pub fn with_provenance(mut self, source: impl Into<String>) -> Self {
        self.provenance = vec![source.into()];
        self
    }

    pub fn with_strength(mut self, strength: Strength) -> Self {
        self.strength = strength;
        self
    }

    pub fn with_status(mut self, status: TripleStatus) -> Self {
        self.status = status;
        self
    }

    pub fn key(&self) -> TripleKey {
        TripleKey {
            head: self.head.clone(),
            relation: self.relation,
            tail: self.tail.clone(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// Identity of a triple for duplicate detection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripleKey {
    pub head: String,
    pub relation: RelationType,
    pub tail: String,
}

/// Result of inserting one triple into a builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Inserted {
        index: usize,
    },
    /// The `(head, relation, tail)` key already existed; strength and
    /// provenance were merged into the stored copy.
    Duplicate {
        index: usize,
    },
}

impl AddOutcome {
    pub fn is_duplicate(self) -> bool {
        matches!(self, AddOutcome::Duplicate { .. })
    }
}

/// Single-writer accumulator for a [`KnowledgeGraph`].
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    entities: IndexMap<String, EntityCategory>,
    triples: IndexMap<TripleKey, Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares an entity. The first category seen for a name is kept.
    pub fn add_entity(&mut self, name: &str, category: EntityCategory) -> Result<String, GraphError> {
        let name = normalize_entity(name);
        if name.is_empty() {
            return Err(GraphError::EmptyEntity);
        }
        self.entities.entry(name.clone()).or_insert(category);
        Ok(name)
    }

    /// Inserts a triple. Exact `(head, relation, tail)` duplicates collapse to
    /// one copy keeping the max strength and the union of provenance ids.
    ///
    /// Endpoint names are normalized and endpoint categories are rewritten to
    /// the first category registered for each entity.
    pub fn add_triple(&mut self, mut triple: Triple) -> Result<AddOutcome, GraphError> {
        triple.head = normalize_entity(&triple.head);
        triple.tail = normalize_entity(&triple.tail);
        if triple.head.is_empty() || triple.tail.is_empty() {
            return Err(GraphError::EmptyEntity);
        }
        triple.head_category = *self.entities.entry(triple.head.clone()).or_insert(triple.head_category);
        triple.tail_category = *self.entities.entry(triple.tail.clone()).or_insert(triple.tail_category);

        match self.triples.entry(triple.key()) {
            Entry::Occupied(mut slot) => {
                let index = slot.index();
                let stored = slot.get_mut();
                stored.strength = stored.strength.max(triple.strength);
                for source in triple.provenance {
                    if !stored.provenance.contains(&source) {
                        stored.provenance.push(source);
                    }
                }
                Ok(AddOutcome::Duplicate { index })
            }
            Entry::Vacant(slot) => {
                let index = slot.index();
                slot.insert(triple);
                Ok(AddOutcome::Inserted { index })
            }
        }
    }

    /// Parses and inserts a triple given as untyped strings.
    pub fn add_record(
        &mut self,
        head: &str,
        head_category: &str,
        relation: &str,
        tail: &str,
        tail_category: &str,
    ) -> Result<AddOutcome, GraphError> {
        self.add_triple(Triple::parse(head, head_category, relation, tail, tail_category)?)
    }

    pub fn contains(&self, key: &TripleKey) -> bool {
        self.triples.contains_key(key)
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn freeze(self) -> KnowledgeGraph {
        let entities: Vec<(String, EntityCategory)> = self.entities.into_iter().collect();
        let triples: Vec<Triple> = self.triples.into_values().collect();
        KnowledgeGraph::from_parts(entities, triples)
    }
}

/// Direction of an adjacency query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

/// Immutable, validated knowledge graph with derived adjacency.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: IndexMap<String, EntityCategory>,
    triples: Vec<Triple>,
    keys: IndexMap<TripleKey, usize>,
    /// Per entity index: indices into `triples`, insertion order.
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        // entity order is not part of identity: isolated nodes are stored first on disk
        self.entities.len() == other.entities.len()
            && self
                .entities
                .iter()
                .all(|(name, cat)| other.entities.get(name) == Some(cat))
            && self.triples == other.triples
    }
}

impl KnowledgeGraph {
    fn from_parts(entities: Vec<(String, EntityCategory)>, triples: Vec<Triple>) -> Self {
        let entities: IndexMap<String, EntityCategory> = entities.into_iter().collect();
        let (out_edges, in_edges) = derive_adjacency(&entities, &triples);
        let keys = triples.iter().enumerate().map(|(i, t)| (t.key(), i)).collect();
        KnowledgeGraph {
            entities,
            triples,
            keys,
            out_edges,
            in_edges,
        }
    }

    /// Reopens the graph for further insertion (used when merging expansions).
    pub fn to_builder(&self) -> GraphBuilder {
        GraphBuilder {
            entities: self.entities.clone(),
            triples: self.triples.iter().map(|t| (t.key(), t.clone())).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, index: usize) -> &Triple {
        &self.triples[index]
    }

    /// Entities with their categories, in insertion order.
    pub fn entities(&self) -> impl Iterator<Item = (&str, EntityCategory)> + '_ {
        self.entities.iter().map(|(n, c)| (n.as_str(), *c))
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entities.get_index_of(name)
    }

    pub fn entity_name(&self, index: usize) -> &str {
        self.entities
            .get_index(index)
            .map(|(n, _)| n.as_str())
            .unwrap_or_default()
    }

    pub fn category(&self, name: &str) -> Option<EntityCategory> {
        self.entities.get(name).copied()
    }

    pub fn contains_key(&self, key: &TripleKey) -> bool {
        self.keys.contains_key(key)
    }

    /// True if any triple `from -> to` exists, whatever its relation.
    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match self.entity_index(from) {
            Some(i) => self.out_edges[i].iter().any(|&t| self.triples[t].tail == to),
            None => false,
        }
    }

    /// Triple indices leaving (or entering) the entity at `index`.
    pub fn edge_indices(&self, index: usize, direction: Direction) -> &[usize] {
        match direction {
            Direction::Out => &self.out_edges[index],
            Direction::In => &self.in_edges[index],
        }
    }

    /// Incident edges as `(relation, neighbor)` pairs, in insertion order.
    pub fn neighbors(&self, entity: &str, direction: Direction) -> Result<Vec<(RelationType, &str)>, GraphError> {
        let key = normalize_entity(entity);
        let index = self
            .entity_index(&key)
            .ok_or_else(|| GraphError::UnknownEntity(entity.to_string()))?;
        Ok(self
            .edge_indices(index, direction)
            .iter()
            .map(|&t| {
                let triple = &self.triples[t];
                let other = match direction {
                    Direction::Out => triple.tail.as_str(),
                    Direction::In => triple.head.as_str(),
                };
                (triple.relation, other)
            })
            .collect())
    }

    /// Total (in + out) degree of the entity at `index`.
    pub fn degree(&self, index: usize) -> usize {
        self.out_edges[index].len() + self.in_edges[index].len()
    }

    pub fn compute_stats(&self) -> Result<GraphStats, GraphError> {
        if self.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let degree_histogram = self
            .entities
            .keys()
            .enumerate()
            .map(|(i, name)| (name.clone(), self.degree(i)))
            .collect();
        Ok(GraphStats {
            node_count: self.node_count(),
            triple_count: self.triple_count(),
            avg_degree: self.triple_count() as f64 / self.node_count() as f64,
            degree_histogram,
        })
    }

    /// The `ceil(fraction * node_count)` entities of highest total degree.
    /// Equal degrees are ordered lexicographically by name.
    pub fn top_degree_hubs(&self, fraction: f64) -> Result<BTreeSet<String>, GraphError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(GraphError::InvalidFraction(fraction));
        }
        if self.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let want = ((fraction * self.node_count() as f64).ceil() as usize).clamp(1, self.node_count());
        let mut ranked: Vec<(usize, &str)> = self
            .entities
            .keys()
            .enumerate()
            .map(|(i, n)| (self.degree(i), n.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(ranked.into_iter().take(want).map(|(_, n)| n.to_string()).collect())
    }

    /// Recomputes adjacency from the triple list and compares with the stored copy.
    pub fn adjacency_is_consistent(&self) -> bool {
        let (out_edges, in_edges) = derive_adjacency(&self.entities, &self.triples);
        out_edges == self.out_edges && in_edges == self.in_edges
    }
}

fn derive_adjacency(
    entities: &IndexMap<String, EntityCategory>,
    triples: &[Triple],
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut out_edges = vec![Vec::new(); entities.len()];
    let mut in_edges = vec![Vec::new(); entities.len()];
    for (i, t) in triples.iter().enumerate() {
        let h = entities
            .get_index_of(&t.head)
            .expect("triple head registered as entity");
        let tl = entities
            .get_index_of(&t.tail)
            .expect("triple tail registered as entity");
        out_edges[h].push(i);
        in_edges[tl].push(i);
    }
    (out_edges, in_edges)
}

/// Size and degree summary of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub triple_count: usize,
    pub avg_degree: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub degree_histogram: BTreeMap<String, usize>,
}

impl GraphStats {
    /// The `{node_count, triple_count, avg_degree}` report.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "node_count": self.node_count,
            "triple_count": self.triple_count,
            "avg_degree": self.avg_degree,
        })
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::vocab::EntityCategory::*;
    use crate::vocab::RelationType::*;

    /// The cochlear-nucleus subgraph used throughout the tests.
    pub fn cochlear_subgraph() -> KnowledgeGraph {
        let edges = [
            (
                "Cochlear Nerve",
                AnatomicalStructure,
                ProjectsTo,
                "Cochlear Nuclei",
                AnatomicalStructure,
            ),
            (
                "Ventral Cochlear Nucleus",
                AnatomicalStructure,
                PartOf,
                "Cochlear Nuclei",
                AnatomicalStructure,
            ),
            (
                "Ventral Cochlear Nucleus",
                AnatomicalStructure,
                Contains,
                "Octopus Cells",
                CellularComponent,
            ),
            (
                "Ventral Cochlear Nucleus",
                AnatomicalStructure,
                Contains,
                "Bushy Cells",
                CellularComponent,
            ),
            (
                "Small Spherical Bushy Cells",
                CellularComponent,
                LocatedIn,
                "Ventral Cochlear Nucleus",
                AnatomicalStructure,
            ),
            (
                "Bushy Cells",
                CellularComponent,
                FormsComplexWith,
                "Large End Bulbs",
                CellularComponent,
            ),
            (
                "Small Spherical Bushy Cells",
                CellularComponent,
                ProjectsTo,
                "Lateral Superior Olive",
                AnatomicalStructure,
            ),
            (
                "Small Spherical Bushy Cells",
                CellularComponent,
                ProjectsTo,
                "Medial Superior Olivary Nucleus",
                AnatomicalStructure,
            ),
            (
                "Bushy Cells",
                CellularComponent,
                ReceivesInputFrom,
                "Cochlear Nerve",
                AnatomicalStructure,
            ),
            (
                "Octopus Cells",
                CellularComponent,
                ReceivesInputFrom,
                "Cochlear Nerve",
                AnatomicalStructure,
            ),
        ];
        let mut b = GraphBuilder::new();
        for (h, hc, r, t, tc) in edges {
            let triple = Triple::new(h, hc, r, t, tc)
                .unwrap()
                .with_provenance("fig2")
                .with_status(TripleStatus::Validated);
            b.add_triple(triple).unwrap();
        }
        b.freeze()
    }
}
