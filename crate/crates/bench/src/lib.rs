//! Shared inputs for the criterion benches.

use pathwise_core::consensus::ContextIndex;
use pathwise_core::extract::{serialize_records, DelimiterSet};
use pathwise_core::mock::MockExtractor;
use pathwise_core::synthetic::{random_graph, synthetic_rl_items};
use pathwise_core::{KnowledgeGraph, OptionLetter, QaItem, TabularToyPolicy, Triple};

pub const SEED: u64 = 7;

/// Roughly the shape of a small seed graph: average degree near 2.
pub fn graph(nodes: usize) -> KnowledgeGraph {
    random_graph(nodes, nodes * 2, SEED)
}

pub fn items(count: usize) -> Vec<QaItem> {
    synthetic_rl_items(count, SEED)
}

/// Gold-answer completions whose reasoning walks the item's path.
pub fn completions(items: &[QaItem]) -> Vec<String> {
    items
        .iter()
        .map(|i| TabularToyPolicy::completion_for(i, i.gold))
        .chain(
            items
                .iter()
                .map(|i| TabularToyPolicy::completion_for(i, OptionLetter::A)),
        )
        .collect()
}

/// A tuple-format extraction response with `sentences` relationships.
pub fn extraction_output(sentences: usize) -> String {
    let text: String = (0..sentences)
        .map(|i| format!("Region {i} projects to region {}. ", i + 1))
        .collect();
    let delims = DelimiterSet::default();
    serialize_records(&MockExtractor::new("bench", delims.clone()).records_for(&text), &delims)
}

pub fn candidates(count: usize) -> (Vec<Triple>, ContextIndex) {
    let g = random_graph(count, count, SEED);
    (g.triples().to_vec(), ContextIndex::new())
}
