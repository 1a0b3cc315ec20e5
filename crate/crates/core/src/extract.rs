//! Text chunking, extraction-prompt assembly and the delimiter-based tuple
//! parser that turns model output into candidate triples.
//!
//! Output syntax, with the default delimiters:
//!
//! ```text
//! ("entity"<|>Dopamine<|>Molecular Entity<|>neurotransmitter)##
//! ("relationship"<|>Substantia Nigra<|>Dopamine<|>releases<|>7)##
//! <|COMPLETE|>
//! ```

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_entity, Strength, Triple, TripleStatus};
use crate::vocab::{EntityCategory, RelationType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("overlap ({overlap}) must be smaller than the window ({window})")]
    InvalidWindow { window: usize, overlap: usize },
    #[error("document has no tokens")]
    EmptyDocument,
    #[error("delimiters must be nonempty and pairwise distinct")]
    InvalidDelimiters,
}

/// Sliding-window chunker settings, in whitespace tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkConfig {
    pub window_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            window_tokens: 300,
            overlap_tokens: 50,
        }
    }
}

/// A contiguous window of document tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextUnit {
    pub id: String,
    pub text: String,
    /// Half-open `[start, end)` token offsets into the document.
    pub token_span: (usize, usize),
}

/// Splits a document into overlapping windows of whitespace tokens.
///
/// Windows advance by `window - overlap` tokens; the final window may be
/// shorter. Unit ids are `{doc_id}-u{index:04}`.
pub fn chunk_text(doc_id: &str, document: &str, cfg: ChunkConfig) -> Result<Vec<TextUnit>, ExtractError> {
    let ChunkConfig {
        window_tokens: window,
        overlap_tokens: overlap,
    } = cfg;
    if window == 0 || overlap >= window {
        return Err(ExtractError::InvalidWindow { window, overlap });
    }
    let tokens: Vec<&str> = document.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(ExtractError::EmptyDocument);
    }
    let stride = window - overlap;
    let mut units = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + window).min(tokens.len());
        units.push(TextUnit {
            id: format!("{doc_id}-u{:04}", units.len()),
            text: tokens[start..end].join(" "),
            token_span: (start, end),
        });
        if end == tokens.len() {
            break;
        }
        start += stride;
    }
    Ok(units)
}

/// The three delimiters of the tuple output format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelimiterSet {
    pub tuple_delim: String,
    pub record_delim: String,
    pub completion_delim: String,
}

impl Default for DelimiterSet {
    fn default() -> Self {
        DelimiterSet {
            tuple_delim: "<|>".into(),
            record_delim: "##".into(),
            completion_delim: "<|COMPLETE|>".into(),
        }
    }
}

impl DelimiterSet {
    pub fn new(
        tuple_delim: impl Into<String>,
        record_delim: impl Into<String>,
        completion_delim: impl Into<String>,
    ) -> Result<Self, ExtractError> {
        let d = DelimiterSet {
            tuple_delim: tuple_delim.into(),
            record_delim: record_delim.into(),
            completion_delim: completion_delim.into(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ExtractError> {
        let all = [&self.tuple_delim, &self.record_delim, &self.completion_delim];
        let distinct = all[0] != all[1] && all[0] != all[2] && all[1] != all[2];
        if all.iter().any(|d| d.is_empty()) || !distinct {
            return Err(ExtractError::InvalidDelimiters);
        }
        Ok(())
    }
}

const ROLE: &str = "You are an AI assistant specialized in extracting structured information from neuroscience textbook content to build a knowledge graph about the nervous system, brain function, and neural mechanisms.";

const GOAL: &str = "Given neuroscience textbook content, a predefined list of entity types, and a predefined list of relations, identify every entity of those types and the scientifically meaningful relationships explicitly described among them within the text. Extract only information directly stated in the text---do not infer, generalize, or use external scientific knowledge.";

const DEMO_TEXT: &str = "Dopaminergic neurons of the substantia nigra pars compacta release dopamine into the dorsal striatum. Degeneration of these neurons results in the motor symptoms of Parkinson's disease.";

fn demo_records() -> Vec<ExtractionRecord> {
    use EntityCategory::*;
    vec![
        ExtractionRecord::entity(
            "Substantia Nigra Pars Compacta",
            AnatomicalStructure,
            "Midbrain nucleus containing dopaminergic neurons",
        ),
        ExtractionRecord::entity("Dopamine", MolecularEntity, "Catecholamine neurotransmitter"),
        ExtractionRecord::entity("Dorsal Striatum", AnatomicalStructure, "Basal ganglia input structure"),
        ExtractionRecord::entity(
            "Parkinson's Disease",
            ClinicalEntity,
            "Movement disorder caused by loss of nigral dopaminergic neurons",
        ),
        ExtractionRecord::relationship(
            "Substantia Nigra Pars Compacta",
            "Dopamine",
            "releases",
            Strength::CENTRAL,
        ),
        ExtractionRecord::relationship(
            "Substantia Nigra Pars Compacta",
            "Dorsal Striatum",
            "projects_to",
            Strength::SUPPORTING,
        ),
        ExtractionRecord::relationship(
            "Substantia Nigra Pars Compacta",
            "Parkinson's Disease",
            "degenerates_in",
            Strength::CENTRAL,
        ),
    ]
}

/// Assembles the extraction prompt for one text unit.
///
/// `{relation_list}` is filled with the JSON-serialized vocabulary and every
/// delimiter slot with `delims`, including inside the one-shot demonstration.
pub fn build_extraction_prompt(unit: &TextUnit, vocab: &[RelationType], delims: &DelimiterSet) -> String {
    let relation_list =
        serde_json::to_string(&vocab.iter().map(|r| r.as_str()).collect::<Vec<_>>()).expect("string list serializes");
    let entity_types = EntityCategory::ALL
        .iter()
        .map(|c| c.label())
        .collect::<Vec<_>>()
        .join(", ");
    let DelimiterSet {
        tuple_delim: td,
        record_delim: rd,
        completion_delim: cd,
    } = delims;
    let demo_output = serialize_records(&demo_records(), delims);

    format!(
        "-Role-\n{ROLE}\n\n\
         -Goal-\n{GOAL}\n\n\
         -Entity Types-\n{entity_types}\n\n\
         -Relations-\n{relation_list}\n\n\
         -Output Format-\n\
         For each entity:\n  (\"entity\"{td}name{td}type{td}description){rd}\n\n\
         For each relationship:\n  (\"relationship\"{td}source{td}target{td}relation{td}strength){rd}\n\n\
         where strength: 7 = central, 5 = supporting, 3 = brief mention. Output ONLY tuples. End with {cd}.\n\n\
         -Example-\nText: {DEMO_TEXT}\nOutput:\n{demo_output}\n\n\
         -Real Data-\nText: {}\nOutput:\n",
        unit.text
    )
}

/// One parsed output tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtractionRecord {
    Entity {
        name: String,
        category: EntityCategory,
        description: String,
    },
    Relationship {
        source: String,
        target: String,
        /// Raw relation string; vocabulary membership is checked when
        /// converting to triples.
        relation: String,
        strength: Strength,
    },
}

impl ExtractionRecord {
    pub fn entity(name: &str, category: EntityCategory, description: &str) -> Self {
        ExtractionRecord::Entity {
            name: name.into(),
            category,
            description: description.into(),
        }
    }

    pub fn relationship(source: &str, target: &str, relation: &str, strength: Strength) -> Self {
        ExtractionRecord::Relationship {
            source: source.into(),
            target: target.into(),
            relation: relation.into(),
            strength,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DiagnosticKind {
    NoCompletionDelimiter,
    NotParenthesized,
    UnknownKind { kind: String },
    FieldCount { expected: usize, found: usize },
    EmptyField,
    UnknownCategory { category: String },
    InvalidStrength { strength: String },
    UnknownRelation { relation: String },
    InvalidEntity,
    UndeclaredEntity { entity: String },
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticKind::NoCompletionDelimiter => write!(f, "no completion delimiter"),
            DiagnosticKind::NotParenthesized => write!(f, "record is not wrapped in parentheses"),
            DiagnosticKind::UnknownKind { kind } => write!(f, "unknown record kind `{kind}`"),
            DiagnosticKind::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            DiagnosticKind::EmptyField => write!(f, "empty field"),
            DiagnosticKind::UnknownCategory { category } => write!(f, "unknown category `{category}`"),
            DiagnosticKind::InvalidStrength { strength } => write!(f, "invalid strength `{strength}`"),
            DiagnosticKind::UnknownRelation { relation } => write!(f, "unknown relation `{relation}`"),
            DiagnosticKind::InvalidEntity => write!(f, "entity name empty after normalization"),
            DiagnosticKind::UndeclaredEntity { entity } => {
                write!(f, "entity `{entity}` not declared; category defaulted")
            }
        }
    }
}

/// A parse or conversion problem tied to a record position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Index of the record segment (0-based); `None` for whole-output issues.
    pub record_index: Option<usize>,
    #[serde(flatten)]
    pub kind: DiagnosticKind,
}

/// Parses tuple output. Never fails: malformed records are skipped and
/// reported. Parsing stops at the completion delimiter.
pub fn parse_extraction_output(text: &str, delims: &DelimiterSet) -> (Vec<ExtractionRecord>, Vec<Diagnostic>) {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let body = match text.find(delims.completion_delim.as_str()) {
        Some(pos) => &text[..pos],
        None => {
            diagnostics.push(Diagnostic {
                record_index: None,
                kind: DiagnosticKind::NoCompletionDelimiter,
            });
            text
        }
    };
    for (index, segment) in body.split(delims.record_delim.as_str()).enumerate() {
        let segment = segment.trim();
        if segment.is_empty() {
            continue;
        }
        match parse_record(segment, &delims.tuple_delim) {
            Ok(record) => records.push(record),
            Err(kind) => diagnostics.push(Diagnostic {
                record_index: Some(index),
                kind,
            }),
        }
    }
    (records, diagnostics)
}

fn parse_record(segment: &str, tuple_delim: &str) -> Result<ExtractionRecord, DiagnosticKind> {
    let inner = segment
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or(DiagnosticKind::NotParenthesized)?;
    let fields: Vec<&str> = inner.split(tuple_delim).map(str::trim).collect();
    let kind = fields[0].trim_matches('"').trim().to_ascii_lowercase();
    let expect = |n: usize| {
        if fields.len() != n {
            return Err(DiagnosticKind::FieldCount {
                expected: n,
                found: fields.len(),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(DiagnosticKind::EmptyField);
        }
        Ok(())
    };
    match kind.as_str() {
        "entity" => {
            expect(4)?;
            let category = fields[2]
                .parse::<EntityCategory>()
                .map_err(|_| DiagnosticKind::UnknownCategory {
                    category: fields[2].to_string(),
                })?;
            Ok(ExtractionRecord::Entity {
                name: fields[1].to_string(),
                category,
                description: fields[3].to_string(),
            })
        }
        "relationship" => {
            expect(5)?;
            let strength = fields[4]
                .parse::<u8>()
                .ok()
                .and_then(|v| Strength::new(v).ok())
                .ok_or_else(|| DiagnosticKind::InvalidStrength {
                    strength: fields[4].to_string(),
                })?;
            Ok(ExtractionRecord::Relationship {
                source: fields[1].to_string(),
                target: fields[2].to_string(),
                relation: fields[3].to_string(),
                strength,
            })
        }
        _ => Err(DiagnosticKind::UnknownKind {
            kind: fields[0].to_string(),
        }),
    }
}

/// Writes records in tuple syntax, terminated by the completion delimiter.
pub fn serialize_records(records: &[ExtractionRecord], delims: &DelimiterSet) -> String {
    let td = &delims.tuple_delim;
    let mut out = String::new();
    for r in records {
        match r {
            ExtractionRecord::Entity {
                name,
                category,
                description,
            } => out.push_str(&format!(
                "(\"entity\"{td}{name}{td}{}{td}{description})",
                category.label()
            )),
            ExtractionRecord::Relationship {
                source,
                target,
                relation,
                strength,
            } => out.push_str(&format!(
                "(\"relationship\"{td}{source}{td}{target}{td}{relation}{td}{})",
                strength.get()
            )),
        }
        out.push_str(&delims.record_delim);
        out.push('\n');
    }
    out.push_str(&delims.completion_delim);
    out
}

/// Converts relationship records into candidate triples.
///
/// Endpoint categories come from entity records of the same unit; endpoints
/// never declared default to `ConceptualEntity` with a diagnostic. Relations
/// outside the vocabulary drop the record with a diagnostic.
pub fn records_to_triples(records: &[ExtractionRecord], unit_id: &str) -> (Vec<Triple>, Vec<Diagnostic>) {
    let declared: HashMap<String, EntityCategory> = records
        .iter()
        .filter_map(|r| match r {
            ExtractionRecord::Entity { name, category, .. } => Some((normalize_entity(name), *category)),
            _ => None,
        })
        .collect();

    let mut triples = Vec::new();
    let mut diagnostics = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let ExtractionRecord::Relationship {
            source,
            target,
            relation,
            strength,
        } = record
        else {
            continue;
        };
        let diag = |kind| Diagnostic {
            record_index: Some(index),
            kind,
        };
        let Ok(relation) = relation.parse::<RelationType>() else {
            diagnostics.push(diag(DiagnosticKind::UnknownRelation {
                relation: relation.clone(),
            }));
            continue;
        };
        let mut category_of = |name: &str| match declared.get(&normalize_entity(name)) {
            Some(c) => *c,
            None => {
                diagnostics.push(diag(DiagnosticKind::UndeclaredEntity {
                    entity: name.to_string(),
                }));
                EntityCategory::ConceptualEntity
            }
        };
        let head_category = category_of(source);
        let tail_category = category_of(target);
        match Triple::new(source, head_category, relation, target, tail_category) {
            Ok(t) => triples.push(
                t.with_provenance(unit_id)
                    .with_strength(*strength)
                    .with_status(TripleStatus::Candidate),
            ),
            Err(_) => diagnostics.push(diag(DiagnosticKind::InvalidEntity)),
        }
    }
    (triples, diagnostics)
}
