//! Two-judge consensus filtering of candidate triples.
//!
//! Each candidate is shown to two independent judges; it survives only when
//! both answer a definitive "Yes". Anything else, including an answer the
//! verdict grammar cannot read, counts as "No".

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::LlmClient;
use crate::error::{ClientError, GraphError};
use crate::graph::{KnowledgeGraph, Triple, TripleKey, TripleStatus};
use crate::vocab::RelationType;

/// Last line of every validation prompt.
pub const FINAL_LINE_INSTRUCTION: &str = "On the final line, answer with exactly one word: Yes or No.";

/// Context placeholder when the source text unit is unknown.
pub const NO_CONTEXT: &str = "no source context available";

const TRIPLE_PREFIX: &str = "Triple: ";

/// Renders a triple as `head —relation→ tail`.
pub fn render_triple(head: &str, relation: RelationType, tail: &str) -> String {
    format!("{head} —{relation}→ {tail}")
}

pub fn build_validation_prompt(triple: &Triple, context: &str) -> String {
    let context = if context.trim().is_empty() {
        NO_CONTEXT
    } else {
        context.trim()
    };
    format!(
        "You are verifying facts extracted from a neuroscience textbook for a knowledge graph.\n\
         Decide whether the following directed triple is factually accurate in the context of the source text.\n\n\
         {TRIPLE_PREFIX}{}\n\
         Head category: {}\nTail category: {}\n\n\
         Source context:\n\"\"\"\n{context}\n\"\"\"\n\n\
         First give a brief reasoning trace that checks the relation direction and the relation type against the text.\n\
         {FINAL_LINE_INSTRUCTION}",
        render_triple(&triple.head, triple.relation, &triple.tail),
        triple.head_category.label(),
        triple.tail_category.label(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Yes,
    No,
    Unparseable,
}

impl Decision {
    pub fn is_yes(self) -> bool {
        self == Decision::Yes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub rationale: String,
}

/// Reads the decision from the last nonempty line: a standalone, case
/// insensitive `yes` or `no` token. Both or neither means unparseable.
/// Earlier lines form the rationale.
pub fn parse_verdict(raw: &str) -> Verdict {
    let lines: Vec<&str> = raw.lines().collect();
    let Some(last_idx) = lines.iter().rposition(|l| !l.trim().is_empty()) else {
        return Verdict {
            decision: Decision::Unparseable,
            rationale: String::new(),
        };
    };
    let mut yes = false;
    let mut no = false;
    for token in lines[last_idx]
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        yes |= token.eq_ignore_ascii_case("yes");
        no |= token.eq_ignore_ascii_case("no");
    }
    let decision = match (yes, no) {
        (true, false) => Decision::Yes,
        (false, true) => Decision::No,
        _ => Decision::Unparseable,
    };
    Verdict {
        decision,
        rationale: lines[..last_idx].join("\n").trim().to_string(),
    }
}

/// One rule of a mock judge's table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub head: String,
    pub relation: RelationType,
    pub tail: String,
    pub verdict: Decision,
}

/// Serializable rule table for [`MockJudge`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRules {
    pub default: Decision,
    #[serde(default)]
    pub rules: Vec<MockRule>,
}

impl Default for MockRules {
    fn default() -> Self {
        MockRules {
            default: Decision::Yes,
            rules: Vec::new(),
        }
    }
}

/// Deterministic judge driven by a rule table keyed by triple.
///
/// It reads the rendered triple back out of the prompt, so it answers any
/// prompt built by [`build_validation_prompt`].
#[derive(Debug, Clone)]
pub struct MockJudge {
    name: String,
    default: Decision,
    rules: HashMap<TripleKey, Decision>,
}

impl MockJudge {
    pub fn new(name: impl Into<String>, rules: MockRules) -> Self {
        MockJudge {
            name: name.into(),
            default: rules.default,
            rules: rules
                .rules
                .into_iter()
                .map(|r| {
                    let key = TripleKey {
                        head: crate::graph::normalize_entity(&r.head),
                        relation: r.relation,
                        tail: crate::graph::normalize_entity(&r.tail),
                    };
                    (key, r.verdict)
                })
                .collect(),
        }
    }

    pub fn approve_all(name: impl Into<String>) -> Self {
        MockJudge::new(name, MockRules::default())
    }

    pub fn set(&mut self, key: TripleKey, decision: Decision) {
        self.rules.insert(key, decision);
    }

    fn lookup(&self, prompt: &str) -> Option<Decision> {
        let line = prompt.lines().find_map(|l| l.strip_prefix(TRIPLE_PREFIX))?;
        let (head, rest) = line.split_once(" —")?;
        let (relation, tail) = rest.split_once("→ ")?;
        let key = TripleKey {
            head: head.to_string(),
            relation: relation.parse().ok()?,
            tail: tail.to_string(),
        };
        Some(self.rules.get(&key).copied().unwrap_or(self.default))
    }
}

impl LlmClient for MockJudge {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        Ok(match self.lookup(prompt) {
            Some(Decision::Yes) => "The triple is stated in the source context.\nYes".into(),
            Some(Decision::No) => "The source context does not support this triple.\nNo".into(),
            Some(Decision::Unparseable) | None => "I cannot decide.".into(),
        })
    }
}

/// One judge call, for audit and replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub triple: TripleKey,
    pub judge: String,
    pub prompt: String,
    pub raw_response: String,
    pub verdict: Decision,
}

/// Counts of joint judge decisions (unparseable counted as no).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub yes_yes: usize,
    pub yes_no: usize,
    pub no_yes: usize,
    pub no_no: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusStats {
    pub candidates: usize,
    pub validated: usize,
    pub rejected: usize,
    pub unparseable_a: usize,
    pub unparseable_b: usize,
    pub agreement: AgreementMatrix,
}

/// Per-candidate outcome of a filter run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedTriple {
    pub index: usize,
    pub decision_a: Decision,
    pub decision_b: Decision,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsensusOutcome {
    pub validated: Vec<Triple>,
    pub rejected: Vec<Triple>,
    pub judged: Vec<JudgedTriple>,
    pub transcripts: Vec<TranscriptEntry>,
    pub stats: ConsensusStats,
}

#[derive(Debug, Error)]
pub enum ConsensusError {
    /// A judge failed; `partial` holds every candidate judged before the abort.
    #[error("judge `{judge}` unavailable at candidate {candidate}: {source}")]
    JudgeUnavailable {
        judge: String,
        candidate: usize,
        #[source]
        source: ClientError,
        partial: Box<ConsensusOutcome>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusOptions {
    /// Upper bound on candidates judged concurrently.
    pub max_in_flight: usize,
}

impl Default for ConsensusOptions {
    fn default() -> Self {
        ConsensusOptions { max_in_flight: 4 }
    }
}

/// Maps text-unit ids to their text for the validation context snippet.
pub type ContextIndex = HashMap<String, String>;

fn context_for<'a>(triple: &Triple, contexts: &'a ContextIndex) -> &'a str {
    triple
        .provenance
        .iter()
        .find_map(|id| contexts.get(id))
        .map(String::as_str)
        .unwrap_or("")
}

struct Judged {
    decision_a: Decision,
    decision_b: Decision,
    transcripts: [TranscriptEntry; 2],
}

fn judge_one(
    triple: &Triple,
    contexts: &ContextIndex,
    judges: [&dyn LlmClient; 2],
) -> Result<Judged, (String, ClientError)> {
    let prompt = build_validation_prompt(triple, context_for(triple, contexts));
    let ask = |judge: &dyn LlmClient| {
        let raw = judge.complete(&prompt).map_err(|e| (judge.name().to_string(), e))?;
        let verdict = parse_verdict(&raw);
        Ok::<_, (String, ClientError)>(TranscriptEntry {
            triple: triple.key(),
            judge: judge.name().to_string(),
            prompt: prompt.clone(),
            raw_response: raw,
            verdict: verdict.decision,
        })
    };
    let a = ask(judges[0])?;
    let b = ask(judges[1])?;
    Ok(Judged {
        decision_a: a.verdict,
        decision_b: b.verdict,
        transcripts: [a, b],
    })
}

/// Runs both judges over every candidate and keeps the consensus-yes set.
///
/// Results are assembled in candidate order regardless of completion order.
pub fn consensus_filter(
    candidates: &[Triple],
    contexts: &ContextIndex,
    judge_a: &dyn LlmClient,
    judge_b: &dyn LlmClient,
    options: ConsensusOptions,
) -> Result<ConsensusOutcome, ConsensusError> {
    let results: Mutex<Vec<Option<Judged>>> = Mutex::new((0..candidates.len()).map(|_| None).collect());
    let failure: Mutex<Option<(usize, String, ClientError)>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = options.max_in_flight.clamp(1, candidates.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= candidates.len() {
                    break;
                }
                match judge_one(&candidates[i], contexts, [judge_a, judge_b]) {
                    Ok(j) => results.lock().unwrap()[i] = Some(j),
                    Err((judge, err)) => {
                        abort.store(true, Ordering::SeqCst);
                        let mut slot = failure.lock().unwrap();
                        // keep the lowest failing index for a stable report
                        if slot.as_ref().is_none_or(|(idx, _, _)| i < *idx) {
                            *slot = Some((i, judge, err));
                        }
                    }
                }
            });
        }
    });

    let outcome = assemble(candidates, results.into_inner().unwrap());
    match failure.into_inner().unwrap() {
        None => Ok(outcome),
        Some((candidate, judge, source)) => Err(ConsensusError::JudgeUnavailable {
            judge,
            candidate,
            source,
            partial: Box::new(outcome),
        }),
    }
}

fn assemble(candidates: &[Triple], results: Vec<Option<Judged>>) -> ConsensusOutcome {
    let mut out = ConsensusOutcome::default();
    for (index, (triple, judged)) in candidates.iter().zip(results).enumerate() {
        let Some(judged) = judged else { continue };
        let (a, b) = (judged.decision_a.is_yes(), judged.decision_b.is_yes());
        let m = &mut out.stats.agreement;
        match (a, b) {
            (true, true) => m.yes_yes += 1,
            (true, false) => m.yes_no += 1,
            (false, true) => m.no_yes += 1,
            (false, false) => m.no_no += 1,
        }
        out.stats.unparseable_a += usize::from(judged.decision_a == Decision::Unparseable);
        out.stats.unparseable_b += usize::from(judged.decision_b == Decision::Unparseable);
        if a && b {
            out.validated.push(triple.clone().with_status(TripleStatus::Validated));
        } else {
            out.rejected.push(triple.clone().with_status(TripleStatus::Rejected));
        }
        out.judged.push(JudgedTriple {
            index,
            decision_a: judged.decision_a,
            decision_b: judged.decision_b,
        });
        out.transcripts.extend(judged.transcripts);
    }
    out.stats.candidates = out.judged.len();
    out.stats.validated = out.validated.len();
    out.stats.rejected = out.rejected.len();
    out
}

/// Accounting for an expansion merge.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub proposed: usize,
    pub validated: usize,
    pub added: usize,
    pub duplicate: usize,
    pub rejected: usize,
    pub seed_triples: usize,
    pub merged_triples: usize,
    pub consensus: ConsensusStats,
}

/// Re-validates proposed expansion triples and merges the survivors into a
/// copy of `graph`. Duplicates of existing triples are counted, not added.
pub fn ingest_expansion(
    proposed: &[Triple],
    graph: &KnowledgeGraph,
    contexts: &ContextIndex,
    judge_a: &dyn LlmClient,
    judge_b: &dyn LlmClient,
    options: ConsensusOptions,
) -> Result<(KnowledgeGraph, MergeReport, ConsensusOutcome), ConsensusError> {
    let proposals: Vec<Triple> = proposed
        .iter()
        .map(|t| {
            t.clone()
                .with_provenance("expansion")
                .with_status(TripleStatus::Candidate)
        })
        .collect();
    let outcome = consensus_filter(&proposals, contexts, judge_a, judge_b, options)?;

    let mut builder = graph.to_builder();
    let mut report = MergeReport {
        proposed: proposals.len(),
        validated: outcome.validated.len(),
        rejected: outcome.rejected.len(),
        seed_triples: graph.triple_count(),
        consensus: outcome.stats.clone(),
        ..MergeReport::default()
    };
    for t in &outcome.validated {
        if builder.add_triple(t.clone())?.is_duplicate() {
            report.duplicate += 1;
        } else {
            report.added += 1;
        }
    }
    let merged = builder.freeze();
    report.merged_triples = merged.triple_count();
    Ok((merged, report, outcome))
}
