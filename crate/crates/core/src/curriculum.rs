//! Curriculum construction: stratified weighted sampling of reasoning paths
//! and their rendering as multiple-choice questions with a step-by-step trace.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::LlmClient;
use crate::error::{ClientError, GraphError};
use crate::graph::{normalize_entity, Direction, KnowledgeGraph, Triple};
use crate::paths::{enumerate_paths, PathError, PruningConfig, ReasoningPath, MAX_HOPS};
use crate::seed::rng_for;
use crate::vocab::RelationType;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OptionLetter {
    A,
    B,
    C,
    D,
}

impl OptionLetter {
    pub const ALL: [OptionLetter; 4] = [OptionLetter::A, OptionLetter::B, OptionLetter::C, OptionLetter::D];

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(OptionLetter::A),
            'B' => Some(OptionLetter::B),
            'C' => Some(OptionLetter::C),
            'D' => Some(OptionLetter::D),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            OptionLetter::A => 'A',
            OptionLetter::B => 'B',
            OptionLetter::C => 'C',
            OptionLetter::D => 'D',
        }
    }
}

impl fmt::Display for OptionLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for OptionLetter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => OptionLetter::from_char(c).ok_or_else(|| format!("not an option letter: {s}")),
            _ => Err(format!("not an option letter: {s}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Sft,
    Rl,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Sft => "sft",
            Split::Rl => "rl",
            Split::Eval => "eval",
        }
    }
}

/// One hop of a serialized path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub head: String,
    pub relation: RelationType,
    pub tail: String,
}

impl From<&Triple> for PathStep {
    fn from(t: &Triple) -> Self {
        PathStep {
            head: t.head.clone(),
            relation: t.relation,
            tail: t.tail.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub hops: usize,
    pub question: String,
    pub options: BTreeMap<OptionLetter, String>,
    pub gold: OptionLetter,
    pub cot_trace: String,
    pub path: Vec<PathStep>,
    pub split: Split,
}

impl QaItem {
    /// Path entities `e0..ek`.
    pub fn concepts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.path.iter().map(|s| s.head.as_str()).collect();
        if let Some(last) = self.path.last() {
            out.push(&last.tail);
        }
        out
    }

    pub fn gold_text(&self) -> Option<&str> {
        self.options.get(&self.gold).map(String::as_str)
    }
}

/// A sampled path awaiting question generation.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStub {
    pub id: String,
    pub split: Split,
    pub path: ReasoningPath,
}

/// Sampling target for one hop level. `count = None` takes every surviving
/// path; the first `rl` sampled items go to the RL split and the rest to
/// `split`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumTarget {
    pub hops: usize,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub rl: usize,
    pub split: Split,
}

impl StratumTarget {
    pub fn default_plan() -> Vec<StratumTarget> {
        let mut plan = vec![
            StratumTarget {
                hops: 1,
                count: None,
                rl: 0,
                split: Split::Sft,
            },
            StratumTarget {
                hops: 2,
                count: Some(30_000),
                rl: 5_000,
                split: Split::Sft,
            },
        ];
        for hops in 3..=5 {
            plan.push(StratumTarget {
                hops,
                count: Some(1_000),
                rl: 0,
                split: Split::Eval,
            });
        }
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub hops: usize,
    pub wanted: usize,
    pub have: usize,
}

impl fmt::Display for Shortfall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-hop wants {}, have {}", self.hops, self.wanted, self.have)
    }
}

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("stratum shortfall: {}", .0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("; "))]
    StratumShortfall(Vec<Shortfall>),
    #[error("invalid stratum target: {0}")]
    InvalidTarget(String),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Mcq(#[from] McqError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{file}: manifest lists {expected} items, file has {actual}")]
    CountMismatch {
        file: String,
        expected: usize,
        actual: usize,
    },
    #[error("{file}:{line}: {message}")]
    Schema { file: String, line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum McqError {
    #[error("only {have} distractors available for {entity:?} (need 3)")]
    DistractorShortage { entity: String, have: usize },
    #[error("path entity {0:?} is not in the graph")]
    UnknownEntity(String),
    #[error(transparent)]
    Client(#[from] ClientError),
}

struct Keyed {
    key: f64,
    seq: usize,
    path: ReasoningPath,
}

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    // Reversed so the BinaryHeap top is the weakest retained key.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then_with(|| self.seq.cmp(&other.seq))
    }
}

/// Weighted sampling of `n` paths without replacement (exponential-key
/// reservoir: key = ln(u) / w, keep the `n` largest). Streams its input.
/// Returns the selection in descending key order, or `Err(have)` when the
/// stream holds fewer than `n` paths with positive weight.
pub fn weighted_sample<I, R>(paths: I, n: usize, rng: &mut R) -> Result<Vec<ReasoningPath>, usize>
where
    I: IntoIterator<Item = ReasoningPath>,
    R: Rng + ?Sized,
{
    let mut heap: BinaryHeap<Keyed> = BinaryHeap::with_capacity(n + 1);
    let mut seen = 0;
    for (seq, path) in paths.into_iter().enumerate() {
        if path.weight <= 0.0 {
            continue;
        }
        seen += 1;
        let u = 1.0 - rng.gen::<f64>();
        let key = u.ln() / path.weight;
        if n == 0 {
            continue;
        }
        if heap.len() < n {
            heap.push(Keyed { key, seq, path });
        } else if heap.peek().is_some_and(|weakest| key > weakest.key) {
            heap.pop();
            heap.push(Keyed { key, seq, path });
        }
    }
    if seen < n {
        return Err(seen);
    }
    // Ascending in the reversed order is descending by key.
    Ok(heap.into_sorted_vec().into_iter().map(|k| k.path).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub hops: usize,
    pub split: Split,
    pub count: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumManifest {
    pub seed: u64,
    pub graph_fingerprint: String,
    pub pruning: PruningConfig,
    pub targets: Vec<StratumTarget>,
    pub strata: Vec<ManifestEntry>,
    /// Sampled paths that could not become questions, with the reason.
    #[serde(default)]
    pub dropped: Vec<DroppedItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedItem {
    pub id: String,
    pub reason: String,
}

pub fn stratum_file(hops: usize, split: Split) -> String {
    format!("hop{hops}-{}.jsonl", split.as_str())
}

fn tally<'a>(keys: impl Iterator<Item = (usize, Split)> + 'a) -> Vec<ManifestEntry> {
    let mut counts: BTreeMap<(usize, Split), usize> = BTreeMap::new();
    for key in keys {
        *counts.entry(key).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((hops, split), count)| ManifestEntry {
            hops,
            split,
            count,
            file: stratum_file(hops, split),
        })
        .collect()
}

impl CurriculumManifest {
    pub fn count(&self, hops: usize, split: Split) -> usize {
        self.strata
            .iter()
            .find(|e| e.hops == hops && e.split == split)
            .map_or(0, |e| e.count)
    }

    pub fn total(&self) -> usize {
        self.strata.iter().map(|e| e.count).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SampledCurriculum {
    pub stubs: Vec<PathStub>,
    pub manifest: CurriculumManifest,
}

fn validate_targets(targets: &[StratumTarget]) -> Result<(), CurriculumError> {
    let mut seen = [false; MAX_HOPS + 1];
    for t in targets {
        if t.hops == 0 || t.hops > MAX_HOPS {
            return Err(CurriculumError::InvalidTarget(format!(
                "hops {} outside 1..={MAX_HOPS}",
                t.hops
            )));
        }
        if std::mem::replace(&mut seen[t.hops], true) {
            return Err(CurriculumError::InvalidTarget(format!("{}-hop listed twice", t.hops)));
        }
        if t.split == Split::Rl && t.rl > 0 {
            return Err(CurriculumError::InvalidTarget(format!(
                "{}-hop: rl count given for an rl stratum",
                t.hops
            )));
        }
        if let Some(count) = t.count {
            if t.rl > count {
                return Err(CurriculumError::InvalidTarget(format!(
                    "{}-hop: rl {} exceeds count {count}",
                    t.hops, t.rl
                )));
            }
        }
    }
    Ok(())
}

/// Samples every stratum. Reproducible from (graph, targets, pruning, seed).
pub fn sample_curriculum(
    graph: &KnowledgeGraph,
    targets: &[StratumTarget],
    pruning: &PruningConfig,
    seed: u64,
) -> Result<SampledCurriculum, CurriculumError> {
    validate_targets(targets)?;
    let mut stubs = Vec::new();
    let mut shortfalls = Vec::new();
    for target in targets {
        let paths = enumerate_paths(graph, target.hops, target.hops, pruning)?;
        let selected = match target.count {
            None => paths.collect::<Vec<_>>(),
            Some(n) => {
                let mut rng = rng_for(seed, &format!("stratum-{}", target.hops));
                match weighted_sample(paths, n, &mut rng) {
                    Ok(selected) => selected,
                    Err(have) => {
                        shortfalls.push(Shortfall {
                            hops: target.hops,
                            wanted: n,
                            have,
                        });
                        continue;
                    }
                }
            }
        };
        if selected.len() < target.rl {
            shortfalls.push(Shortfall {
                hops: target.hops,
                wanted: target.rl,
                have: selected.len(),
            });
            continue;
        }
        for (i, path) in selected.into_iter().enumerate() {
            stubs.push(PathStub {
                id: format!("h{}-{i:06}", target.hops),
                split: if i < target.rl { Split::Rl } else { target.split },
                path,
            });
        }
    }
    if !shortfalls.is_empty() {
        return Err(CurriculumError::StratumShortfall(shortfalls));
    }
    let manifest = CurriculumManifest {
        seed,
        graph_fingerprint: crate::graph::fingerprint(graph),
        pruning: *pruning,
        targets: targets.to_vec(),
        strata: tally(stubs.iter().map(|s| (s.path.hops(), s.split))),
        dropped: Vec::new(),
    };
    Ok(SampledCurriculum { stubs, manifest })
}

/// One sentence per hop: `Step i: head gloss tail.`
pub fn path_to_cot(path: &ReasoningPath) -> String {
    steps_to_cot(path.triples.iter().map(PathStep::from))
}

fn steps_to_cot(steps: impl Iterator<Item = PathStep>) -> String {
    steps
        .enumerate()
        .map(|(i, s)| format!("Step {}: {} {} {}.", i + 1, s.head, s.relation.gloss(), s.tail))
        .collect::<Vec<_>>()
        .join("\n")
}

fn template_question(path: &ReasoningPath) -> String {
    let chain = path
        .triples
        .iter()
        .map(|t| t.relation.gloss())
        .collect::<Vec<_>>()
        .join(" -> ");
    let noun = if path.hops() == 1 { "relation" } else { "relation chain" };
    format!(
        "Starting from {} and following the {noun} \"{chain}\", which entity is reached?",
        path.start()
    )
}

/// Entities eligible as distractors: same category as the answer, not on the
/// path, and not an out-neighbor of the penultimate entity.
pub fn distractor_pool(graph: &KnowledgeGraph, path: &ReasoningPath) -> Result<Vec<String>, McqError> {
    let answer = path.end();
    let category = graph
        .category(answer)
        .ok_or_else(|| McqError::UnknownEntity(answer.to_string()))?;
    let penultimate = &path.concepts[path.concepts.len() - 2];
    let excluded: std::collections::HashSet<&str> = graph
        .neighbors(penultimate, Direction::Out)
        .map_err(|_| McqError::UnknownEntity(penultimate.clone()))?
        .into_iter()
        .map(|(_, tail)| tail)
        .chain(path.concepts.iter().map(String::as_str))
        .collect();
    let mut pool: Vec<String> = graph
        .entities()
        .filter(|(name, c)| *c == category && !excluded.contains(name))
        .map(|(name, _)| name.to_string())
        .collect();
    pool.sort();
    Ok(pool)
}

/// Deterministic template rendering of a sampled path.
pub fn generate_mcq_template(graph: &KnowledgeGraph, stub: &PathStub, seed: u64) -> Result<QaItem, McqError> {
    let pool = distractor_pool(graph, &stub.path)?;
    if pool.len() < 3 {
        return Err(McqError::DistractorShortage {
            entity: stub.path.end().to_string(),
            have: pool.len(),
        });
    }
    let mut rng = rng_for(seed, &stub.id);
    let mut texts: Vec<String> = pool.choose_multiple(&mut rng, 3).cloned().collect();
    texts.push(stub.path.end().to_string());
    texts.shuffle(&mut rng);
    let gold_pos = texts
        .iter()
        .position(|t| t == stub.path.end())
        .expect("answer was inserted");
    Ok(QaItem {
        id: stub.id.clone(),
        hops: stub.path.hops(),
        question: template_question(&stub.path),
        options: OptionLetter::ALL.into_iter().zip(texts).collect(),
        gold: OptionLetter::ALL[gold_pos],
        cot_trace: path_to_cot(&stub.path),
        path: stub.path.triples.iter().map(PathStep::from).collect(),
        split: stub.split,
    })
}

pub fn build_generation_prompt(path: &ReasoningPath) -> String {
    let steps = path
        .triples
        .iter()
        .map(|t| format!("({}, {}, {})", t.head, t.relation, t.tail))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "Write one multiple-choice question that can only be answered by reasoning along this knowledge-graph path.\n\
         Path:\n{steps}\n\n\
         The question must start from \"{}\" and its correct answer must be \"{}\".\n\
         Give four options labelled A to D with three plausible but wrong distractors, and a step-by-step reasoning trace naming every entity on the path.\n\
         Reply with a single JSON object: {{\"question\": str, \"options\": {{\"A\": str, \"B\": str, \"C\": str, \"D\": str}}, \"gold\": \"A\"|\"B\"|\"C\"|\"D\", \"cot_trace\": str}}",
        path.start(),
        path.end()
    )
}

#[derive(Deserialize)]
struct LlmItem {
    question: String,
    options: BTreeMap<String, String>,
    gold: String,
    cot_trace: String,
}

fn parse_llm_item(raw: &str, stub: &PathStub) -> Result<QaItem, String> {
    let start = raw.find('{').ok_or("no JSON object in response")?;
    let end = raw.rfind('}').ok_or("no JSON object in response")?;
    if end < start {
        return Err("no JSON object in response".into());
    }
    let parsed: LlmItem = serde_json::from_str(&raw[start..=end]).map_err(|e| e.to_string())?;
    let mut options = BTreeMap::new();
    for (k, v) in parsed.options {
        let letter: OptionLetter = k.parse()?;
        if v.trim().is_empty() {
            return Err(format!("option {letter} is empty"));
        }
        options.insert(letter, v.trim().to_string());
    }
    if options.len() != 4 {
        return Err(format!("expected 4 options, got {}", options.len()));
    }
    let normalized: std::collections::HashSet<String> = options.values().map(|v| normalize_entity(v)).collect();
    if normalized.len() != 4 {
        return Err("option texts are not distinct".into());
    }
    let gold: OptionLetter = parsed.gold.parse()?;
    if normalize_entity(&options[&gold]) != stub.path.end() {
        return Err(format!("gold option {gold} does not name the path end"));
    }
    if parsed.question.trim().is_empty() || parsed.cot_trace.trim().is_empty() {
        return Err("empty question or trace".into());
    }
    Ok(QaItem {
        id: stub.id.clone(),
        hops: stub.path.hops(),
        question: parsed.question.trim().to_string(),
        options,
        gold,
        cot_trace: parsed.cot_trace.trim().to_string(),
        path: stub.path.triples.iter().map(PathStep::from).collect(),
        split: stub.split,
    })
}

#[derive(Clone, Copy)]
pub enum GenerationMode<'a> {
    Template,
    Llm(&'a dyn LlmClient),
}

/// Renders one stub. In LLM mode a response that fails schema checks falls
/// back to the template with the reason returned as a diagnostic.
pub fn generate_mcq(
    graph: &KnowledgeGraph,
    stub: &PathStub,
    mode: GenerationMode<'_>,
    seed: u64,
) -> Result<(QaItem, Option<String>), McqError> {
    match mode {
        GenerationMode::Template => Ok((generate_mcq_template(graph, stub, seed)?, None)),
        GenerationMode::Llm(client) => {
            let raw = client.complete(&build_generation_prompt(&stub.path))?;
            match parse_llm_item(&raw, stub) {
                Ok(item) => Ok((item, None)),
                Err(reason) => {
                    let item = generate_mcq_template(graph, stub, seed)?;
                    Ok((item, Some(format!("{}: {reason}; used template", stub.id))))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GeneratedItems {
    pub items: Vec<QaItem>,
    pub dropped: Vec<DroppedItem>,
    pub diagnostics: Vec<String>,
}

/// A rendered item with its generator diagnostic, or the render error.
type Rendered = Result<(QaItem, Option<String>), McqError>;

/// Renders all stubs, dropping those without enough distractors. LLM calls
/// run on up to `max_in_flight` threads; output order follows the stubs.
pub fn generate_items(
    graph: &KnowledgeGraph,
    stubs: &[PathStub],
    mode: GenerationMode<'_>,
    seed: u64,
    max_in_flight: usize,
) -> Result<GeneratedItems, McqError> {
    let workers = match mode {
        GenerationMode::Template => 1,
        GenerationMode::Llm(_) => max_in_flight.clamp(1, stubs.len().max(1)),
    };
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Rendered>>> = Mutex::new((0..stubs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, AtomicOrdering::SeqCst);
                let Some(stub) = stubs.get(i) else { break };
                let result = generate_mcq(graph, stub, mode, seed);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(result);
            });
        }
    });
    let mut out = GeneratedItems::default();
    for (stub, slot) in stubs.iter().zip(slots.into_inner().expect("workers joined")) {
        match slot.expect("every stub is processed") {
            Ok((item, diagnostic)) => {
                out.items.push(item);
                out.diagnostics.extend(diagnostic);
            }
            Err(e @ McqError::DistractorShortage { .. }) => out.dropped.push(DroppedItem {
                id: stub.id.clone(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Manifest describing exactly the given items.
pub fn finalize_manifest(sampled: &CurriculumManifest, generated: &GeneratedItems) -> CurriculumManifest {
    CurriculumManifest {
        strata: tally(generated.items.iter().map(|i| (i.hops, i.split))),
        dropped: generated.dropped.clone(),
        ..sampled.clone()
    }
}

fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

/// Writes `manifest.json` plus one JSONL file per (hop, split) stratum.
pub fn write_curriculum(dir: &Path, manifest: &CurriculumManifest, items: &[QaItem]) -> Result<(), GraphError> {
    fs::create_dir_all(dir).map_err(|e| GraphError::io(dir, e))?;
    for entry in &manifest.strata {
        let path = dir.join(&entry.file);
        let file = fs::File::create(&path).map_err(|e| GraphError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for item in items.iter().filter(|i| i.hops == entry.hops && i.split == entry.split) {
            write_json_line(&mut out, item).map_err(|e| GraphError::io(&path, e))?;
        }
        out.flush().map_err(|e| GraphError::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| GraphError::io(&path, e))
}

/// Reads a curriculum directory back, checking manifest counts against files.
pub fn read_curriculum(dir: &Path) -> Result<(CurriculumManifest, Vec<QaItem>), CurriculumError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| GraphError::io(&path, e))?;
    let manifest: CurriculumManifest = serde_json::from_str(&text).map_err(|e| CurriculumError::Schema {
        file: MANIFEST_FILE.into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut items = Vec::new();
    for entry in &manifest.strata {
        let items_before = items.len();
        items.extend(read_items(&dir.join(&entry.file))?);
        let actual = items.len() - items_before;
        if actual != entry.count {
            return Err(CurriculumError::CountMismatch {
                file: entry.file.clone(),
                expected: entry.count,
                actual,
            });
        }
    }
    Ok((manifest, items))
}

/// Reads a JSONL file of items.
pub fn read_items(path: &Path) -> Result<Vec<QaItem>, CurriculumError> {
    let file = fs::File::open(path).map_err(|e| GraphError::io(path, e))?;
    let name = path.display().to_string();
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GraphError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: QaItem = serde_json::from_str(&line).map_err(|e| CurriculumError::Schema {
            file: name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}
