//! Deterministic stand-in for the extraction model.
//!
//! Reads the text unit back out of an extraction prompt and emits a
//! relationship for every sentence of the form `<head> <relation gloss>
//! <tail>`, e.g. "The cochlear nerve projects to the cochlear nuclei."

use crate::client::LlmClient;
use crate::error::ClientError;
use crate::extract::{serialize_records, DelimiterSet, ExtractionRecord};
use crate::graph::{normalize_entity, Strength};
use crate::vocab::{EntityCategory, RelationType};

const TEXT_MARKER: &str = "-Real Data-\nText: ";
const OUTPUT_MARKER: &str = "\nOutput:";
const MAX_PHRASE_WORDS: usize = 4;
const STOPWORDS: [&str; 6] = ["the", "a", "an", "which", "that", "and"];

#[derive(Debug, Clone)]
pub struct MockExtractor {
    name: String,
    delims: DelimiterSet,
    /// Longest glosses first so "receives modulatory input from" wins over
    /// shorter overlapping phrases.
    glosses: Vec<(Vec<String>, RelationType)>,
}

impl MockExtractor {
    pub fn new(name: impl Into<String>, delims: DelimiterSet) -> Self {
        let mut glosses: Vec<(Vec<String>, RelationType)> = RelationType::ALL
            .iter()
            .map(|&r| (r.gloss().split(' ').map(str::to_string).collect(), r))
            .collect();
        glosses.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.as_str().cmp(b.1.as_str())));
        MockExtractor {
            name: name.into(),
            delims,
            glosses,
        }
    }

    fn phrase(words: &[&str]) -> Option<String> {
        let words: Vec<&str> = words
            .iter()
            .copied()
            .skip_while(|w| STOPWORDS.contains(&w.to_lowercase().as_str()))
            .collect();
        if words.is_empty() || words.len() > MAX_PHRASE_WORDS {
            return None;
        }
        let name = normalize_entity(&words.join(" "));
        (!name.is_empty()).then_some(name)
    }

    fn sentence_record(&self, sentence: &str) -> Option<(String, RelationType, String)> {
        let words: Vec<&str> = sentence.split_whitespace().collect();
        let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        for (gloss, relation) in &self.glosses {
            let Some(at) = lower.windows(gloss.len()).position(|w| w == gloss.as_slice()) else {
                continue;
            };
            let head = Self::phrase(&words[..at])?;
            let tail = Self::phrase(&words[at + gloss.len()..])?;
            if head == tail {
                return None;
            }
            return Some((head, *relation, tail));
        }
        None
    }

    /// The records this extractor produces for a text.
    pub fn records_for(&self, text: &str) -> Vec<ExtractionRecord> {
        let mut entities: Vec<String> = Vec::new();
        let mut relationships = Vec::new();
        for sentence in text.split(['.', ';', '\n']) {
            let Some((head, relation, tail)) = self.sentence_record(sentence) else {
                continue;
            };
            for name in [&head, &tail] {
                if !entities.contains(name) {
                    entities.push(name.clone());
                }
            }
            relationships.push(ExtractionRecord::relationship(
                &head,
                &tail,
                relation.as_str(),
                Strength::SUPPORTING,
            ));
        }
        entities
            .iter()
            .map(|e| ExtractionRecord::entity(e, EntityCategory::ConceptualEntity, "mentioned in the text"))
            .chain(relationships)
            .collect()
    }
}

impl LlmClient for MockExtractor {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let text = prompt
            .rfind(TEXT_MARKER)
            .map(|i| &prompt[i + TEXT_MARKER.len()..])
            .map(|t| t.rfind(OUTPUT_MARKER).map_or(t, |j| &t[..j]))
            .unwrap_or("");
        Ok(serialize_records(&self.records_for(text), &self.delims))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{
        build_extraction_prompt, chunk_text, parse_extraction_output, records_to_triples, ChunkConfig,
    };

    #[test]
    fn extracts_gloss_sentences_through_the_prompt() {
        let delims = DelimiterSet::default();
        let doc = "The cochlear nerve projects to the cochlear nuclei. Nothing relates here. \
                   Bushy cells receive input from somewhere; octopus cells receives input from the cochlear nerve.";
        let unit = &chunk_text("doc", doc, ChunkConfig::default()).unwrap()[0];
        let prompt = build_extraction_prompt(unit, &RelationType::ALL, &delims);
        let mock = MockExtractor::new("mock", delims.clone());
        let raw = mock.complete(&prompt).unwrap();
        let (records, diags) = parse_extraction_output(&raw, &delims);
        assert!(diags.is_empty(), "{diags:?}");
        let (triples, _) = records_to_triples(&records, &unit.id);
        let keys: Vec<String> = triples
            .iter()
            .map(|t| format!("{} {} {}", t.head, t.relation, t.tail))
            .collect();
        assert_eq!(
            keys,
            vec![
                "cochlear nerve projects_to cochlear nuclei",
                "octopus cells receives_input_from cochlear nerve"
            ]
        );
    }

    #[test]
    fn long_phrases_are_skipped() {
        let mock = MockExtractor::new("m", DelimiterSet::default());
        assert!(mock
            .records_for("one two three four five activates dopamine")
            .is_empty());
        assert_eq!(mock.records_for("glutamate activates nmda receptors").len(), 3);
    }
}
