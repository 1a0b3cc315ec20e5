//! One function per subcommand.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use pathwise_core::client::{EndpointConfig, HttpChatClient, LlmClient};
use pathwise_core::consensus::{
    consensus_filter, ingest_expansion, ConsensusError, ContextIndex, MockJudge, MockRules,
};
use pathwise_core::curriculum::{
    finalize_manifest, generate_items, read_curriculum, read_items, sample_curriculum, write_curriculum,
    CurriculumManifest, GenerationMode, ManifestEntry,
};
use pathwise_core::eval::{accuracy_csv, build_report, markdown_table, EvalInput};
use pathwise_core::extract::{
    build_extraction_prompt, chunk_text, parse_extraction_output, records_to_triples, Diagnostic, TextUnit,
};
use pathwise_core::graph::{
    load_jsonl, read_jsonl as read_graph_lines, save_jsonl, write_jsonl as write_triples, GraphLine,
};
use pathwise_core::grpo::{
    group_advantages, path_reward, planned_steps, run_training_observed, RecordedPolicy, RecordedSample, RemotePolicy,
};
use pathwise_core::mock::MockExtractor;
use pathwise_core::paths::{count_paths, hub_set};
use pathwise_core::reward::{parse_tagged_completion, score_batch, score_completion, ScoreRequest};
use pathwise_core::seed::rng_for;
use pathwise_core::synthetic::synthetic_rl_items;
use pathwise_core::{
    GraphBuilder, KnowledgeGraph, OptionLetter, Policy, QaItem, RelationType, Split, TabularToyPolicy, Triple,
    TripleStatus,
};
use serde::Serialize;

use crate::config::{GenerationKind, PolicyKind};
use crate::error::CliError;
use crate::run::{existing, read_json, read_jsonl, RunContext, CANDIDATES, CHUNKS, CURRICULUM_DIR, SEED_KG};

fn endpoint_client(
    stage: &'static str,
    name: &str,
    endpoint: Option<&EndpointConfig>,
    key: &str,
) -> Result<Box<dyn LlmClient>, CliError> {
    let endpoint =
        endpoint.ok_or_else(|| CliError::input(stage, format!("`{key}` is not configured; set it or pass --mock")))?;
    let client = HttpChatClient::new(name, endpoint.clone()).map_err(|e| CliError::client(stage, e))?;
    Ok(Box::new(client))
}

fn load_graph(stage: &'static str, path: &Path) -> Result<KnowledgeGraph, CliError> {
    load_jsonl(path).map_err(|e| CliError::graph(stage, e))
}

fn read_triples(stage: &'static str, path: &Path) -> Result<Vec<Triple>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let lines = read_graph_lines(file).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))?;
    Ok(lines
        .into_iter()
        .filter_map(|l| match l {
            GraphLine::Triple(t) => Some(t),
            GraphLine::Entity { .. } => None,
        })
        .collect())
}

fn triples_jsonl<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_triples(&mut buf, triples).expect("writing to a Vec cannot fail");
    buf
}

pub fn chunk(ctx: &RunContext) -> Result<(), CliError> {
    const STAGE: &str = "chunks";
    let corpus = &ctx.config.paths.corpus_dir;
    let entries = fs::read_dir(corpus).map_err(|e| CliError::io(corpus, e))?;
    let mut docs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    docs.sort();
    if docs.is_empty() {
        return Err(CliError::input(
            STAGE,
            format!("no .txt documents in {}", corpus.display()),
        ));
    }
    let mut stage = ctx.stage(STAGE)?;
    let mut units = Vec::new();
    for doc in &docs {
        let text = fs::read_to_string(doc).map_err(|e| CliError::io(doc, e))?;
        let id = doc
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        units.extend(chunk_text(&id, &text, ctx.config.chunk).map_err(|e| CliError::input(STAGE, e))?);
        stage.input(doc);
    }
    stage.write_jsonl("units.jsonl", &units)?;
    println!("{} documents, {} text units", docs.len(), units.len());
    stage.finish()
}

#[derive(Serialize)]
struct UnitDiagnostic<'a> {
    unit_id: &'a str,
    #[serde(flatten)]
    diagnostic: &'a Diagnostic,
}

#[derive(Serialize)]
struct RawResponse<'a> {
    unit_id: &'a str,
    response: &'a str,
}

pub fn extract(ctx: &RunContext) -> Result<(), CliError> {
    const STAGE: &str = "extract";
    let units_path = ctx.require(STAGE, CHUNKS, "chunk")?;
    let units: Vec<TextUnit> = read_jsonl(STAGE, &units_path)?;
    let delims = &ctx.config.extraction.delimiters;
    let client: Box<dyn LlmClient> = if ctx.config.mock {
        Box::new(MockExtractor::new("mock-extractor", delims.clone()))
    } else {
        endpoint_client(
            STAGE,
            "extractor",
            ctx.config.extraction.endpoint.as_ref(),
            "extraction.endpoint",
        )?
    };
    let mut stage = ctx.stage(STAGE)?;
    stage.input(&units_path);
    let mut builder = GraphBuilder::new();
    let mut responses = Vec::new();
    let mut diagnostics = Vec::new();
    for unit in &units {
        let prompt = build_extraction_prompt(unit, &RelationType::ALL, delims);
        let raw = client.complete(&prompt).map_err(|e| CliError::client(STAGE, e))?;
        let (records, mut diags) = parse_extraction_output(&raw, delims);
        let (triples, conversion) = records_to_triples(&records, &unit.id);
        diags.extend(conversion);
        for t in triples {
            builder
                .add_triple(t.with_status(TripleStatus::Candidate))
                .map_err(|e| CliError::graph(STAGE, e))?;
        }
        diagnostics.extend(diags.into_iter().map(|d| (unit.id.clone(), d)));
        responses.push((unit.id.clone(), raw));
    }
    let candidates = builder.freeze();
    stage.write_bytes("candidates.jsonl", &triples_jsonl(candidates.triples()))?;
    let diag_lines: Vec<UnitDiagnostic> = diagnostics
        .iter()
        .map(|(unit_id, diagnostic)| UnitDiagnostic { unit_id, diagnostic })
        .collect();
    stage.write_jsonl("diagnostics.jsonl", &diag_lines)?;
    let raw_lines: Vec<RawResponse> = responses
        .iter()
        .map(|(unit_id, response)| RawResponse { unit_id, response })
        .collect();
    stage.write_jsonl("raw_responses.jsonl", &raw_lines)?;
    println!(
        "{} units, {} candidate triples, {} diagnostics",
        units.len(),
        candidates.triple_count(),
        diagnostics.len()
    );
    stage.finish()
}

/// Unit id to text, or empty when chunking has not run.
fn contexts(ctx: &RunContext, stage: &'static str) -> Result<ContextIndex, CliError> {
    let path = ctx.path(CHUNKS);
    if !path.exists() {
        return Ok(ContextIndex::new());
    }
    let units: Vec<TextUnit> = read_jsonl(stage, &path)?;
    Ok(units.into_iter().map(|u| (u.id, u.text)).collect())
}

fn judges(ctx: &RunContext, stage: &'static str) -> Result<[Box<dyn LlmClient>; 2], CliError> {
    let j = &ctx.config.judges;
    if ctx.config.mock {
        let rules = |p: &Option<PathBuf>| -> Result<MockRules, CliError> {
            p.as_deref().map_or(Ok(MockRules::default()), |p| read_json(stage, p))
        };
        return Ok([
            Box::new(MockJudge::new("mock-judge-a", rules(&j.mock_rules_a)?)),
            Box::new(MockJudge::new("mock-judge-b", rules(&j.mock_rules_b)?)),
        ]);
    }
    Ok([
        endpoint_client(stage, "judge-a", j.judge_a.as_ref(), "judges.judge_a")?,
        endpoint_client(stage, "judge-b", j.judge_b.as_ref(), "judges.judge_b")?,
    ])
}

/// Keeps the transcripts of a partial run before reporting a judge failure.
fn consensus_failure(stage: &mut crate::run::StageRecord<'_>, e: ConsensusError) -> CliError {
    if let ConsensusError::JudgeUnavailable { partial, .. } = &e {
        if let Err(io) = stage.write_jsonl("partial_transcripts.jsonl", &partial.transcripts) {
            warn!("could not save partial transcripts: {io}");
        }
    }
    CliError::consensus(stage.name, e)
}

pub fn validate(ctx: &RunContext, candidates: Option<&Path>) -> Result<(), CliError> {
    const STAGE: &str = "validate";
    let path = match candidates {
        Some(p) => existing(STAGE, p)?,
        None => ctx.require(STAGE, CANDIDATES, "extract")?,
    };
    let candidates = read_triples(STAGE, &path)?;
    let contexts = contexts(ctx, STAGE)?;
    let [a, b] = judges(ctx, STAGE)?;
    let mut stage = ctx.stage(STAGE)?;
    stage.input(&path);
    let outcome = match consensus_filter(
        &candidates,
        &contexts,
        a.as_ref(),
        b.as_ref(),
        ctx.config.judges.options(),
    ) {
        Ok(o) => o,
        Err(e) => return Err(consensus_failure(&mut stage, e)),
    };
    let mut builder = GraphBuilder::new();
    for t in &outcome.validated {
        builder.add_triple(t.clone()).map_err(|e| CliError::graph(STAGE, e))?;
    }
    let graph = builder.freeze();
    let kg = stage.out("seed_kg.jsonl");
    save_jsonl(&graph, &kg).map_err(|e| CliError::graph(STAGE, e))?;
    stage.output(kg);
    stage.write_bytes("rejected.jsonl", &triples_jsonl(&outcome.rejected))?;
    stage.write_jsonl("transcripts.jsonl", &outcome.transcripts)?;
    stage.write_json("stats.json", &outcome.stats)?;
    println!(
        "{} candidates, {} validated, {} rejected",
        outcome.stats.candidates, outcome.stats.validated, outcome.stats.rejected
    );
    stage.finish()
}

pub fn expand_ingest(ctx: &RunContext, proposals: &Path, graph: Option<&Path>) -> Result<(), CliError> {
    const STAGE: &str = "expand";
    let proposals_path = existing(STAGE, proposals)?;
    let graph_path = match graph {
        Some(p) => existing(STAGE, p)?,
        None => ctx.require(STAGE, SEED_KG, "validate")?,
    };
    let proposed = read_triples(STAGE, &proposals_path)?;
    let seed = load_graph(STAGE, &graph_path)?;
    let contexts = contexts(ctx, STAGE)?;
    let [a, b] = judges(ctx, STAGE)?;
    let mut stage = ctx.stage(STAGE)?;
    stage.input(&graph_path);
    stage.input(&proposals_path);
    let (merged, report, outcome) = match ingest_expansion(
        &proposed,
        &seed,
        &contexts,
        a.as_ref(),
        b.as_ref(),
        ctx.config.judges.options(),
    ) {
        Ok(r) => r,
        Err(e) => return Err(consensus_failure(&mut stage, e)),
    };
    let kg = stage.out("merged_kg.jsonl");
    save_jsonl(&merged, &kg).map_err(|e| CliError::graph(STAGE, e))?;
    stage.output(kg);
    stage.write_json("report.json", &report)?;
    stage.write_jsonl("transcripts.jsonl", &outcome.transcripts)?;
    println!(
        "{} proposed, {} added, {} duplicate, {} rejected; graph now has {} triples",
        report.proposed, report.added, report.duplicate, report.rejected, report.merged_triples
    );
    stage.finish()
}

fn graph_input(ctx: &RunContext, stage: &'static str, graph: Option<&Path>) -> Result<PathBuf, CliError> {
    match graph {
        Some(p) => existing(stage, p),
        None => ctx.default_graph(stage),
    }
}

pub fn stats(ctx: &RunContext, graph: Option<&Path>) -> Result<(), CliError> {
    const STAGE: &str = "stats";
    let path = graph_input(ctx, STAGE, graph)?;
    let g = load_graph(STAGE, &path)?;
    let stats = g.compute_stats().map_err(|e| CliError::graph(STAGE, e))?;
    let mut stage = ctx.stage(STAGE)?;
    stage.input(&path);
    let summary = stats.summary_json();
    stage.write_json("stats.json", &summary)?;
    print!("{}", crate::run::to_pretty(&summary));
    stage.finish()
}

#[derive(Serialize)]
struct PathCounts {
    hub_count: usize,
    counts: BTreeMap<usize, usize>,
}

pub fn paths(ctx: &RunContext, graph: Option<&Path>, min_hops: usize, max_hops: usize) -> Result<(), CliError> {
    const STAGE: &str = "paths";
    let path = graph_input(ctx, STAGE, graph)?;
    let g = load_graph(STAGE, &path)?;
    let cfg = &ctx.config.pruning;
    let counts = count_paths(&g, min_hops, max_hops, cfg).map_err(|e| CliError::input(STAGE, e))?;
    let mut stage = ctx.stage(STAGE)?;
    stage.input(&path);
    let report = PathCounts {
        hub_count: hub_set(&g, cfg).len(),
        counts,
    };
    stage.write_json("counts.json", &report)?;
    for (k, n) in &report.counts {
        println!("{k}-hop: {n}");
    }
    stage.finish()
}

pub fn curriculum(ctx: &RunContext, graph: Option<&Path>) -> Result<(), CliError> {
    const STAGE: &str = "curriculum";
    let path = graph_input(ctx, STAGE, graph)?;
    let g = load_graph(STAGE, &path)?;
    let cc = &ctx.config.curriculum;
    let sampled = sample_curriculum(&g, &cc.targets, &ctx.config.pruning, ctx.config.seed)
        .map_err(|e| CliError::curriculum(STAGE, e))?;
    let generator = match cc.generation {
        GenerationKind::Llm if !ctx.config.mock => Some(endpoint_client(
            STAGE,
            "generator",
            cc.generator.as_ref(),
            "curriculum.generator",
        )?),
        _ => None,
    };
    let mode = generator
        .as_deref()
        .map_or(GenerationMode::Template, GenerationMode::Llm);
    let generated = generate_items(&g, &sampled.stubs, mode, ctx.config.seed, cc.max_in_flight)
        .map_err(|e| CliError::mcq(STAGE, e))?;
    let manifest = finalize_manifest(&sampled.manifest, &generated);
    let mut stage = ctx.stage(STAGE)?;
    stage.input(&path);
    write_curriculum(&stage.dir, &manifest, &generated.items).map_err(|e| CliError::graph(STAGE, e))?;
    register_curriculum(&mut stage, &manifest);
    stage.write_jsonl("diagnostics.jsonl", &generated.diagnostics)?;
    for e in &manifest.strata {
        println!("{}-hop {}: {}", e.hops, e.split.as_str(), e.count);
    }
    if !manifest.dropped.is_empty() {
        println!("{} sampled paths dropped (see manifest.json)", manifest.dropped.len());
    }
    stage.finish()
}

fn register_curriculum(stage: &mut crate::run::StageRecord<'_>, manifest: &CurriculumManifest) {
    stage.output(stage.out("manifest.json"));
    for e in &manifest.strata {
        stage.output(stage.out(&e.file));
    }
}

/// Items from a curriculum directory or a JSONL file.
fn load_items(stage: &'static str, path: &Path) -> Result<Vec<QaItem>, CliError> {
    if path.is_dir() {
        read_curriculum(path)
            .map(|(_, items)| items)
            .map_err(|e| CliError::curriculum(stage, e))
    } else {
        read_items(&existing(stage, path)?).map_err(|e| CliError::curriculum(stage, e))
    }
}

fn record_items_input(stage: &mut crate::run::StageRecord<'_>, path: &Path) {
    if path.is_dir() {
        stage.input(&path.join("manifest.json"));
    } else {
        stage.input(path);
    }
}

fn items_input(ctx: &RunContext, stage: &'static str, items: Option<&Path>) -> Result<PathBuf, CliError> {
    match items {
        Some(p) => existing(stage, p),
        None => ctx.require(stage, CURRICULUM_DIR, "curriculum").and_then(|dir| {
            let manifest = dir.join("manifest.json");
            if manifest.exists() {
                Ok(dir)
            } else {
                Err(CliError::MissingInput {
                    stage,
                    path: manifest,
                    producer: "curriculum",
                })
            }
        }),
    }
}

pub fn score(ctx: &RunContext, input: &Path, items: Option<&Path>) -> Result<(), CliError> {
    const STAGE: &str = "score";
    let input = existing(STAGE, input)?;
    let items_path = items_input(ctx, STAGE, items)?;
    let items = load_items(STAGE, &items_path)?;
    let requests: Vec<ScoreRequest> = read_jsonl(STAGE, &input)?;
    let scored = score_batch(&requests, &items, &ctx.config.reward).map_err(|e| CliError::input(STAGE, e))?;
    let mut stage = ctx.stage(STAGE)?;
    record_items_input(&mut stage, &items_path);
    stage.input(&input);
    stage.write_jsonl("scores.jsonl", &scored)?;
    let mean = scored.iter().map(|s| s.breakdown.total).sum::<f64>() / scored.len().max(1) as f64;
    println!("{} completions scored, mean reward {mean:.4}", scored.len());
    stage.finish()
}

#[derive(Serialize)]
struct GrpoSummary {
    policy: String,
    items: usize,
    planned_steps: usize,
    steps: usize,
    initial_accuracy: Option<f64>,
    final_accuracy: Option<f64>,
}

#[derive(Serialize)]
struct ScoredGroup {
    item_id: String,
    completions: Vec<String>,
    rewards: Vec<f64>,
    advantages: Vec<f64>,
}

pub fn grpo(ctx: &RunContext, items: Option<&Path>, synthetic: Option<usize>) -> Result<(), CliError> {
    const STAGE: &str = "grpo";
    let cfg = &ctx.config.grpo;
    let (items, source) = match synthetic {
        Some(n) => (synthetic_rl_items(n, ctx.config.seed), None),
        None => {
            let path = items_input(ctx, STAGE, items)?;
            let all = load_items(STAGE, &path)?;
            (
                all.into_iter().filter(|i| i.split == Split::Rl).collect::<Vec<_>>(),
                Some(path),
            )
        }
    };
    if items.is_empty() {
        return Err(CliError::input(STAGE, "no RL-split items to train on"));
    }
    let pc = &ctx.config.policy;
    let kind = if ctx.config.mock && pc.kind == PolicyKind::Remote {
        info!("mock run: using the toy policy instead of the remote one");
        PolicyKind::Toy
    } else {
        pc.kind
    };
    let mut stage = ctx.stage(STAGE)?;
    if let Some(p) = source.as_deref() {
        record_items_input(&mut stage, p);
    }
    let reward = path_reward(ctx.config.reward);
    match kind {
        PolicyKind::Toy => {
            let mut policy = TabularToyPolicy::new();
            let mut transcripts: Vec<RecordedSample> = Vec::new();
            let stats = run_training_observed(&items, &mut policy, &reward, cfg, &mut |_, outcome| {
                for g in &outcome.groups {
                    for (completion, logprob) in g.completions.iter().zip(&g.sample_logprobs) {
                        transcripts.push(RecordedSample {
                            item_id: g.item_id.clone(),
                            completion: completion.clone(),
                            logprob: *logprob,
                        });
                    }
                }
            })
            .map_err(|e| CliError::grpo(STAGE, e))?;
            stage.write_bytes("train_stats.jsonl", stats.to_jsonl().as_bytes())?;
            stage.write_jsonl("transcripts.jsonl", &transcripts)?;
            stage.write_json("policy.json", &policy)?;
            let summary = GrpoSummary {
                policy: policy.name().to_string(),
                items: items.len(),
                planned_steps: planned_steps(items.len(), cfg),
                steps: stats.steps.len(),
                initial_accuracy: stats.initial_accuracy,
                final_accuracy: stats.final_accuracy(),
            };
            stage.write_json("summary.json", &summary)?;
            println!(
                "{} steps over {} items; accuracy {} -> {}",
                summary.steps,
                summary.items,
                fmt_acc(summary.initial_accuracy),
                fmt_acc(summary.final_accuracy)
            );
        }
        PolicyKind::Recorded | PolicyKind::Remote => {
            let policy: Box<dyn Policy> = if kind == PolicyKind::Recorded {
                let path = pc
                    .transcript
                    .as_deref()
                    .ok_or_else(|| CliError::input(STAGE, "policy.transcript is required for a recorded policy"))?;
                let path = existing(STAGE, path)?;
                stage.input(&path);
                Box::new(RecordedPolicy::new(read_jsonl::<RecordedSample>(STAGE, &path)?))
            } else {
                let url = pc
                    .base_url
                    .as_deref()
                    .ok_or_else(|| CliError::input(STAGE, "policy.base_url is required for a remote policy"))?;
                Box::new(RemotePolicy::new(url, pc.timeout_secs).map_err(|e| CliError::grpo(STAGE, e))?)
            };
            let groups = score_groups(&items, policy.as_ref(), ctx)?;
            stage.write_jsonl("scored_groups.jsonl", &groups)?;
            println!(
                "{} policy cannot be updated; scored {} groups",
                policy.name(),
                groups.len()
            );
        }
    }
    stage.finish()
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or("n/a".into(), |a| format!("{a:.3}"))
}

/// Offline scoring for policies that cannot be updated: sample a group per
/// item, score it and compute group-relative advantages.
fn score_groups(items: &[QaItem], policy: &dyn Policy, ctx: &RunContext) -> Result<Vec<ScoredGroup>, CliError> {
    const STAGE: &str = "grpo";
    let cfg = &ctx.config.grpo;
    let params = cfg.sampling();
    let mut rng = rng_for(ctx.config.seed, "grpo-score");
    let mut groups = Vec::new();
    for item in items {
        let mut completions = Vec::new();
        let mut rewards = Vec::new();
        for _ in 0..cfg.n_generations {
            let sample = policy
                .sample(item, &params, &mut rng)
                .map_err(|e| CliError::grpo(STAGE, e))?;
            let breakdown = score_completion(&parse_tagged_completion(&sample.text), item, &ctx.config.reward);
            rewards.push(breakdown.total);
            completions.push(sample.text);
        }
        let advantages = group_advantages(&rewards, cfg.advantage_guard).map_err(|e| CliError::grpo(STAGE, e))?;
        groups.push(ScoredGroup {
            item_id: item.id.clone(),
            completions,
            rewards,
            advantages,
        });
    }
    Ok(groups)
}

#[derive(Serialize)]
struct LabelledReport<'a> {
    label: &'a str,
    records: usize,
    #[serde(flatten)]
    report: &'a pathwise_core::EvalReport,
}

/// `LABEL=PATH`, or a bare path labelled by its file stem.
pub fn parse_labelled(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (label, path)
        }
    }
}

pub fn eval(ctx: &RunContext, inputs: &[String]) -> Result<(), CliError> {
    const STAGE: &str = "eval";
    let hops = &ctx.config.eval.hops;
    let mut stage = ctx.stage(STAGE)?;
    let mut reports = Vec::new();
    for arg in inputs {
        let (label, path) = parse_labelled(arg);
        let path = existing(STAGE, &path)?;
        let lines: Vec<EvalInput> = read_jsonl(STAGE, &path)?;
        let records: Vec<_> = lines.iter().map(Into::into).collect();
        let report = build_report(&records, hops, ctx.config.eval.fit_method);
        for k in &report.empty_strata {
            warn!("{label}: no {k}-hop records");
        }
        stage.input(&path);
        reports.push((label, lines.len(), report));
    }
    let json: Vec<LabelledReport> = reports
        .iter()
        .map(|(label, records, report)| LabelledReport {
            label,
            records: *records,
            report,
        })
        .collect();
    stage.write_json("report.json", &json)?;
    let rows: Vec<(&str, &pathwise_core::EvalReport)> = reports.iter().map(|(l, _, r)| (l.as_str(), r)).collect();
    let table = markdown_table(&rows, hops);
    stage.write_bytes("report.md", table.as_bytes())?;
    stage.write_bytes("accuracy.csv", accuracy_csv(&rows).as_bytes())?;
    print!("{table}");
    stage.finish()
}

#[derive(Serialize)]
struct ResponseLogSpec {
    format: &'static str,
    fields: BTreeMap<&'static str, &'static str>,
    example: Option<EvalInput>,
    evaluate_with: &'static str,
}

#[derive(Serialize)]
struct BundleMetadata<'a> {
    format: &'static str,
    version: u32,
    config_hash: &'a str,
    seed: u64,
    options: Vec<OptionLetter>,
    strata: &'a [ManifestEntry],
    item_count: usize,
    response_log: ResponseLogSpec,
}

pub fn quiz_export(ctx: &RunContext, curriculum: Option<&Path>, splits: &[Split]) -> Result<(), CliError> {
    const STAGE: &str = "quiz";
    let dir = items_input(ctx, STAGE, curriculum)?;
    if !dir.is_dir() {
        return Err(CliError::input(
            STAGE,
            format!("{} is not a curriculum directory", dir.display()),
        ));
    }
    let (manifest, items) = read_curriculum(&dir).map_err(|e| CliError::curriculum(STAGE, e))?;
    let items: Vec<QaItem> = items
        .into_iter()
        .filter(|i| splits.is_empty() || splits.contains(&i.split))
        .collect();
    let manifest = CurriculumManifest {
        strata: manifest
            .strata
            .into_iter()
            .filter(|e| splits.is_empty() || splits.contains(&e.split))
            .collect(),
        ..manifest
    };
    let mut stage = ctx.stage(STAGE)?;
    stage.input(&dir.join("manifest.json"));
    let bundle = stage.out("bundle");
    write_curriculum(&bundle, &manifest, &items).map_err(|e| CliError::graph(STAGE, e))?;
    stage.output(bundle.join("manifest.json"));
    for e in &manifest.strata {
        stage.output(bundle.join(&e.file));
    }
    let metadata = BundleMetadata {
        format: "pathwise-quiz-bundle",
        version: 1,
        config_hash: &ctx.hash,
        seed: ctx.config.seed,
        options: OptionLetter::ALL.to_vec(),
        strata: &manifest.strata,
        item_count: items.len(),
        response_log: ResponseLogSpec {
            format: "jsonl",
            fields: BTreeMap::from([
                ("item_id", "item id from the bundle"),
                ("hops", "hop count of the item"),
                ("gold", "gold option letter"),
                ("raw_completion", "the chosen letter wrapped as <answer>X</answer>"),
            ]),
            example: items.first().map(|i| EvalInput::from_choice(i, OptionLetter::A)),
            evaluate_with: "pathwise eval --input LABEL=responses.jsonl",
        },
    };
    stage.write_json("bundle/metadata.json", &metadata)?;
    println!("exported {} items to {}", items.len(), bundle.display());
    stage.finish()
}
