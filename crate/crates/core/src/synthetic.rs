//! Seeded synthetic graphs and curricula for tests, benches and mock runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::curriculum::{generate_items, sample_curriculum, GenerationMode, QaItem, Split, StratumTarget};
use crate::graph::{GraphBuilder, KnowledgeGraph, Triple, TripleStatus};
use crate::paths::PruningConfig;
use crate::seed::rng_for;
use crate::vocab::{EntityCategory, RelationType};

pub fn entity_name(i: usize) -> String {
    format!("entity {i:05}")
}

/// A graph with exactly `nodes` entities and `triples` distinct triples
/// between distinct endpoints. Categories cycle through the vocabulary.
///
/// # Panics
/// If `triples` exceeds the number of possible distinct triples.
pub fn random_graph(nodes: usize, triples: usize, seed: u64) -> KnowledgeGraph {
    assert!(nodes >= 2 || triples == 0, "need two entities for an edge");
    assert!(triples <= nodes * (nodes - 1) * RelationType::ALL.len());
    let mut rng = rng_for(seed, "random-graph");
    let mut b = GraphBuilder::new();
    let categories: Vec<EntityCategory> = (0..nodes)
        .map(|i| EntityCategory::ALL[i % EntityCategory::ALL.len()])
        .collect();
    for (i, &c) in categories.iter().enumerate() {
        b.add_entity(&entity_name(i), c).expect("generated names are valid");
    }
    while b.triple_count() < triples {
        let h = rng.gen_range(0..nodes);
        let mut t = rng.gen_range(0..nodes - 1);
        if t >= h {
            t += 1;
        }
        let relation = *RelationType::ALL.choose(&mut rng).expect("vocabulary is nonempty");
        let triple = Triple::new(&entity_name(h), categories[h], relation, &entity_name(t), categories[t])
            .expect("generated names are valid")
            .with_provenance("synthetic")
            .with_status(TripleStatus::Validated);
        b.add_triple(triple).expect("generated triples are valid");
    }
    b.freeze()
}

/// `count` template-mode 2-hop items, all in the RL split.
pub fn synthetic_rl_items(count: usize, seed: u64) -> Vec<QaItem> {
    let nodes = (count * 4).max(60);
    let graph = random_graph(nodes, nodes * 3, seed);
    let target = StratumTarget {
        hops: 2,
        count: Some(count * 2),
        rl: count * 2,
        split: Split::Sft,
    };
    let sampled = sample_curriculum(&graph, &[target], &PruningConfig::default(), seed)
        .expect("synthetic graph has enough 2-hop paths");
    let generated = generate_items(&graph, &sampled.stubs, GenerationMode::Template, seed, 1)
        .expect("template mode needs no client");
    let mut items = generated.items;
    assert!(items.len() >= count, "synthetic graph produced too few items");
    items.truncate(count);
    items
}
