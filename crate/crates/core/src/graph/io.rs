//! JSONL persistence for graphs and triple lists.
//!
//! One JSON object per line with the keys `head`, `head_category`,
//! `relation`, `tail`, `tail_category`, `provenance`, `strength`, `status`.
//! Entities that take part in no triple are written as
//! `{"entity": name, "category": cat}` lines so that round-trips preserve
//! isolated nodes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::{GraphBuilder, KnowledgeGraph, Triple};
use crate::error::GraphError;
use crate::vocab::EntityCategory;

/// One line of a graph file.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphLine {
    Triple(Triple),
    Entity { name: String, category: EntityCategory },
}

#[derive(Serialize, Deserialize)]
struct EntityLine {
    entity: String,
    category: EntityCategory,
}

pub(super) fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

/// Parses graph-file lines, reporting the 1-based line number on failure.
pub fn read_jsonl<R: Read>(reader: R) -> Result<Vec<GraphLine>, GraphError> {
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| GraphError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| GraphError::Schema { line: line_no, message };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        let is_entity = value.get("entity").is_some() && value.get("head").is_none();
        if is_entity {
            let e: EntityLine = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
            lines.push(GraphLine::Entity {
                name: e.entity,
                category: e.category,
            });
        } else {
            let t: Triple = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
            lines.push(GraphLine::Triple(t));
        }
    }
    Ok(lines)
}

/// Writes a triple list (no entity lines), e.g. a candidate file.
pub fn write_jsonl<'a, W: Write>(writer: W, triples: impl IntoIterator<Item = &'a Triple>) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    for t in triples {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn write_graph<W: Write>(graph: &KnowledgeGraph, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    for (i, (name, category)) in graph.entities().enumerate() {
        if graph.degree(i) == 0 {
            let line = EntityLine {
                entity: name.to_string(),
                category,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    for t in graph.triples() {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_jsonl(graph: &KnowledgeGraph, destination: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = destination.as_ref();
    let file = File::create(path).map_err(|e| GraphError::io(path, e))?;
    write_graph(graph, file).map_err(|e| GraphError::io(path, e))
}

pub fn load_jsonl(source: impl AsRef<Path>) -> Result<KnowledgeGraph, GraphError> {
    let path = source.as_ref();
    let file = File::open(path).map_err(|e| GraphError::io(path, e))?;
    graph_from_lines(read_jsonl(file)?)
}

fn graph_from_lines(lines: Vec<GraphLine>) -> Result<KnowledgeGraph, GraphError> {
    let mut builder = GraphBuilder::new();
    for line in lines {
        match line {
            GraphLine::Entity { name, category } => {
                builder.add_entity(&name, category)?;
            }
            GraphLine::Triple(t) => {
                builder.add_triple(t)?;
            }
        }
    }
    Ok(builder.freeze())
}

/// SHA-256 of the canonical JSONL serialization, hex encoded.
pub fn fingerprint(graph: &KnowledgeGraph) -> String {
    let mut buf = Vec::new();
    write_graph(graph, &mut buf).expect("writing to a Vec cannot fail");
    hex::encode(Sha256::digest(&buf))
}
