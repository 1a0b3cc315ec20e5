//! Acceptance suite: one PASS/FAIL line per headline criterion.
//!
//! Run with `cargo test -p pathwise-core --test acceptance -- --nocapture`
//! to see the report. Every tolerance is pinned here.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use pathwise_core::consensus::{consensus_filter, ContextIndex, Decision, MockJudge, MockRule, MockRules};
use pathwise_core::curriculum::{generate_items, sample_curriculum, write_curriculum, GenerationMode, PathStep};
use pathwise_core::eval::{degradation_rate, fit_per_step_error, FitMethod};
use pathwise_core::extract::{parse_extraction_output, serialize_records, DelimiterSet, ExtractionRecord};
use pathwise_core::graph::{Strength, TripleKey};
use pathwise_core::grpo::{group_advantages, path_reward, run_training, RewardFn};
use pathwise_core::paths::enumerate_paths;
use pathwise_core::reward::{parse_tagged_completion, score_completion, total_reward};
use pathwise_core::synthetic::{entity_name, random_graph, synthetic_rl_items};
use pathwise_core::{
    EntityCategory, GraphBuilder, GrpoConfig, KnowledgeGraph, OptionLetter, PruningConfig, QaItem, RelationType,
    RewardBreakdown, RewardConfig, Split, StratumTarget, TabularToyPolicy, Triple, TripleStatus,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

/// Reference per-hop accuracies (3, 4, 5 hops) and degradation rates.
const TABLE: [(&str, [f64; 3], f64); 4] = [
    ("Frontier LLM", [86.9, 85.2, 82.2], 2.35),
    ("Base", [81.2, 76.8, 76.4], 2.40),
    ("SFT", [88.7, 88.3, 84.8], 1.95),
    ("SFT+RL", [90.7, 89.9, 88.0], 1.35),
];

fn acc_map(acc: [f64; 3]) -> BTreeMap<usize, f64> {
    [3, 4, 5].into_iter().zip(acc).collect()
}

fn degradation_rates() -> Outcome {
    let start = Instant::now();
    let mut got = Vec::new();
    for (name, acc, want) in TABLE {
        let d = degradation_rate(acc[0], acc[2]);
        check((d - want).abs() <= 1e-9, || format!("{name}: {d} != {want}"))?;
        got.push(format!("{d:.2}"));
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(got.join(", "))
}

fn per_step_error() -> Outcome {
    let fit = |acc| fit_per_step_error(&acc_map(acc), FitMethod::Endpoint).map_err(|e| e.to_string());
    let sft_rl = fit(TABLE[3].1)?.p;
    let frontier = fit(TABLE[0].1)?.p;
    check((sft_rl - 0.015).abs() <= 0.001, || format!("SFT+RL p = {sft_rl}"))?;
    check((frontier - 0.028).abs() <= 0.002, || format!("frontier p = {frontier}"))?;
    for (a3, p) in [(80.0, 0.05), (92.5, 0.013), (60.0, 0.2)] {
        let acc = [a3, a3 * (1.0 - p), a3 * (1.0 - p) * (1.0 - p)];
        for method in [FitMethod::Endpoint, FitMethod::LeastSquares] {
            let got = fit(acc)?.p;
            let got = if method == FitMethod::Endpoint {
                got
            } else {
                fit_per_step_error(&acc_map(acc), method).map_err(|e| e.to_string())?.p
            };
            check((got - p).abs() <= 1e-9, || {
                format!("generator p={p}, {method:?} fit {got}")
            })?;
        }
    }
    Ok(format!("SFT+RL {sft_rl:.4}, frontier {frontier:.4}"))
}

fn random_item(rng: &mut StdRng, id: usize) -> QaItem {
    let hops = rng.gen_range(1..=5);
    let names: Vec<String> = (0..=hops)
        .map(|_| format!("concept {}", rng.gen_range(0..40)))
        .collect();
    let path = names
        .windows(2)
        .map(|w| PathStep {
            head: w[0].clone(),
            relation: *RelationType::ALL.choose(rng).unwrap(),
            tail: w[1].clone(),
        })
        .collect();
    let gold = *OptionLetter::ALL.choose(rng).unwrap();
    QaItem {
        id: format!("fuzz-{id}"),
        hops,
        question: "q".into(),
        options: OptionLetter::ALL
            .into_iter()
            .map(|l| (l, format!("option {l}")))
            .collect(),
        gold,
        cot_trace: String::new(),
        path,
        split: Split::Rl,
    }
}

fn noise(rng: &mut StdRng, max_len: usize) -> String {
    let mut bytes = vec![0u8; rng.gen_range(0..max_len)];
    rng.fill(bytes.as_mut_slice());
    String::from_utf8_lossy(&bytes).into_owned()
}

/// A third are raw random bytes. The rest wrap noise and path concepts in
/// tags; a quarter of those run past the soft length limit, so the gate,
/// coverage, repetition and length terms are all exercised.
fn random_completion(rng: &mut StdRng, item: &QaItem) -> String {
    if rng.gen_bool(1.0 / 3.0) {
        return noise(rng, 1024);
    }
    let mut think = noise(rng, 256);
    for c in item.concepts() {
        if rng.gen_bool(0.6) {
            think.push(' ');
            think.push_str(c);
        }
    }
    let filler = if rng.gen_bool(0.25) {
        rng.gen_range(1200..2200)
    } else {
        rng.gen_range(0..200)
    };
    for _ in 0..filler {
        think.push_str(&format!(" w{}", rng.gen_range(0..400)));
    }
    let answer = match rng.gen_range(0..6) {
        0 => noise(rng, 16),
        1 => String::new(),
        2 | 3 => item.gold.to_string(),
        _ => OptionLetter::ALL.choose(rng).unwrap().to_string(),
    };
    if rng.gen_bool(0.1) {
        format!("<think>{think}</think>")
    } else {
        format!("<think>{think}</think>\n<answer>{answer}</answer>")
    }
}

fn reward_fuzz() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(11);
    let cfg = RewardConfig::default();
    let items: Vec<QaItem> = (0..500).map(|i| random_item(&mut rng, i)).collect();
    let (mut gated, mut penalized) = (0, 0);
    for _ in 0..10_000 {
        let item = items.choose(&mut rng).unwrap();
        let raw = random_completion(&mut rng, item);
        let r = total_reward(&raw, item, &cfg);
        check((-2.0..=1.8).contains(&r.total), || {
            format!("total {} for {raw:?}", r.total)
        })?;
        check((0.0..=0.8).contains(&r.r_path), || format!("r_path {}", r.r_path))?;
        check(r.correct || r.r_path == 0.0, || {
            format!("wrong answer earned r_path {}", r.r_path)
        })?;
        gated += usize::from(r.r_path > 0.0);
        penalized += usize::from(r.length_penalty > 0.0);
    }
    check(gated > 1000 && penalized > 1000, || {
        format!("weak coverage: {gated} gated, {penalized} length-penalized")
    })?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "10000 completions, {gated} with r_path > 0, {penalized} length-penalized"
    ))
}

fn four_concept_item() -> QaItem {
    let mut rng = StdRng::seed_from_u64(0);
    let mut item = random_item(&mut rng, 0);
    let names = ["locus coeruleus", "norepinephrine", "alpha receptors", "arousal"];
    item.hops = 3;
    item.gold = OptionLetter::C;
    item.path = names
        .windows(2)
        .map(|w| PathStep {
            head: w[0].into(),
            relation: RelationType::Releases,
            tail: w[1].into(),
        })
        .collect();
    item
}

fn worked_values() -> Outcome {
    let cfg = RewardConfig::default();
    let item = four_concept_item();
    let score = |think: &str| -> RewardBreakdown {
        let raw = format!("<think>{think}</think><answer>C</answer>");
        score_completion(&parse_tagged_completion(&raw), &item, &cfg)
    };
    let capped = score("The locus coeruleus releases norepinephrine onto alpha receptors.");
    check(capped.coverage == 0.75 && capped.hits >= 2 && capped.rho == 1.0, || {
        format!("{capped:?}")
    })?;
    check(capped.r_path == 0.8, || format!("cap case r_path {}", capped.r_path))?;
    let partial = score("The locus coeruleus releases norepinephrine.");
    check(
        partial.coverage == 0.5 && partial.hits == 2 && partial.rho == 1.0,
        || format!("{partial:?}"),
    )?;
    let want = 0.8 * 0.5 + 0.3;
    check(partial.r_path == want, || format!("0.7 case r_path {}", partial.r_path))?;
    check(partial.total == 1.0 + want, || {
        format!("0.7 case total {}", partial.total)
    })?;
    Ok(format!("cap case {}, partial case {}", capped.r_path, partial.r_path))
}

fn advantage_properties() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let guard = GrpoConfig::default().advantage_guard;
    let mut normalized = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=16);
        let uniform = rng.gen_bool(0.1);
        let base: f64 = rng.gen_range(-2.0..1.8);
        let rewards: Vec<f64> = (0..n)
            .map(|_| if uniform { base } else { rng.gen_range(-2.0..1.8) })
            .collect();
        let adv = group_advantages(&rewards, guard).map_err(|e| e.to_string())?;
        let mean_r = rewards.iter().sum::<f64>() / n as f64;
        let std_r = (rewards.iter().map(|r| (r - mean_r).powi(2)).sum::<f64>() / n as f64).sqrt();
        if std_r < guard {
            check(adv.iter().all(|&a| a == 0.0), || {
                format!("uniform group {rewards:?} gave {adv:?}")
            })?;
            continue;
        }
        normalized += 1;
        let mean = adv.iter().sum::<f64>() / n as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        check(mean.abs() <= 1e-9 && (std - 1.0).abs() <= 1e-9, || {
            format!("mean {mean}, std {std}")
        })?;
    }
    Ok(format!("{normalized} normalized groups, {} uniform", 1000 - normalized))
}

/// Every simple path with `k_min..=k_max` edges, by plain recursion over
/// the triple list.
fn brute_force_paths(graph: &KnowledgeGraph, k_min: usize, k_max: usize) -> BTreeSet<Vec<TripleKey>> {
    fn extend(
        graph: &KnowledgeGraph,
        path: &mut Vec<usize>,
        visited: &mut Vec<String>,
        k_min: usize,
        k_max: usize,
        out: &mut BTreeSet<Vec<TripleKey>>,
    ) {
        if path.len() >= k_min {
            out.insert(path.iter().map(|&i| graph.triple(i).key()).collect());
        }
        if path.len() == k_max {
            return;
        }
        let end = visited.last().unwrap().clone();
        for (i, t) in graph.triples().iter().enumerate() {
            if t.head == end && !visited.contains(&t.tail) {
                path.push(i);
                visited.push(t.tail.clone());
                extend(graph, path, visited, k_min, k_max, out);
                visited.pop();
                path.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    for (start, _) in graph.entities() {
        extend(
            graph,
            &mut Vec::new(),
            &mut vec![start.to_string()],
            k_min,
            k_max,
            &mut out,
        );
    }
    out
}

fn path_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(3);
    let mut total_paths = 0;
    for g in 0..200 {
        let nodes = rng.gen_range(2..=12);
        let max_triples = (nodes * (nodes - 1)).min(30);
        let triples = rng.gen_range(0..=max_triples);
        let graph = random_graph(nodes, triples, g);
        let (k_min, k_max) = (1, rng.gen_range(1..=5));
        let emitted: Vec<_> = enumerate_paths(&graph, k_min, k_max, &PruningConfig::disabled())
            .map_err(|e| e.to_string())?
            .collect();
        let as_set: BTreeSet<Vec<TripleKey>> = emitted
            .iter()
            .map(|p| p.triples.iter().map(Triple::key).collect())
            .collect();
        check(as_set.len() == emitted.len(), || {
            format!("graph {g}: duplicate paths emitted")
        })?;
        let oracle = brute_force_paths(&graph, k_min, k_max);
        check(as_set == oracle, || {
            format!("graph {g}: enumerator {} paths, oracle {}", as_set.len(), oracle.len())
        })?;
        total_paths += oracle.len();

        let pruned = PruningConfig {
            hub_policy: pathwise_core::paths::HubPolicy::Off,
            ..PruningConfig::default()
        };
        for p in enumerate_paths(&graph, 2, k_max.max(2), &pruned).map_err(|e| e.to_string())? {
            check(!graph.has_edge(p.start(), p.end()), || {
                format!("graph {g}: pruned path {} -> {} has a direct edge", p.start(), p.end())
            })?;
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("200 graphs, {total_paths} paths matched"))
}

fn consensus_accounting() -> Outcome {
    let graph = random_graph(400, 8000, 21);
    let candidates: Vec<Triple> = graph
        .triples()
        .iter()
        .map(|t| t.clone().with_status(TripleStatus::Candidate))
        .collect();
    // Judge A vetoes candidates 0..1200, judge B vetoes 900..1843: the
    // union of vetoes is the fixed 1,843-subset.
    let rule = |t: &Triple| MockRule {
        head: t.head.clone(),
        relation: t.relation,
        tail: t.tail.clone(),
        verdict: Decision::No,
    };
    let rules = |range: std::ops::Range<usize>| MockRules {
        default: Decision::Yes,
        rules: candidates[range].iter().map(rule).collect(),
    };
    let a = MockJudge::new("a", rules(0..1200));
    let b = MockJudge::new("b", rules(900..1843));
    let outcome =
        consensus_filter(&candidates, &ContextIndex::new(), &a, &b, Default::default()).map_err(|e| e.to_string())?;
    let (v, r) = (outcome.validated.len(), outcome.rejected.len());
    check(v == 6157 && r == 1843, || format!("validated {v}, rejected {r}"))?;

    let yes = |judge: &str| -> HashSet<TripleKey> {
        outcome
            .transcripts
            .iter()
            .filter(|t| t.judge == judge && t.verdict == Decision::Yes)
            .map(|t| t.triple.clone())
            .collect()
    };
    let both: HashSet<TripleKey> = yes("a").intersection(&yes("b")).cloned().collect();
    let validated: HashSet<TripleKey> = outcome.validated.iter().map(Triple::key).collect();
    check(both == validated, || {
        "validated set differs from the yes-set intersection".into()
    })?;
    Ok(format!("8000 -> {v} validated + {r} rejected"))
}

fn graph_stats() -> Outcome {
    let graph = random_graph(9187, 19_755, 1);
    let stats = graph.compute_stats().map_err(|e| e.to_string())?;
    check(stats.node_count == 9187 && stats.triple_count == 19_755, || {
        format!("{stats:?}")
    })?;
    check((stats.avg_degree - 2.15).abs() <= 0.005, || {
        format!("avg_degree {}", stats.avg_degree)
    })?;
    Ok(format!("avg_degree {:.4}", stats.avg_degree))
}

fn random_text(rng: &mut StdRng, words: usize) -> String {
    const WORDS: [&str; 10] = [
        "cortex", "dopamine", "layer", "synapse", "nucleus", "alpha", "receptor", "glial", "tract", "vesicle",
    ];
    (0..words)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_records(rng: &mut StdRng) -> Vec<ExtractionRecord> {
    (0..rng.gen_range(0..12))
        .map(|_| {
            if rng.gen_bool(0.4) {
                let (n, d) = (rng.gen_range(1..4), rng.gen_range(1..10));
                let (name, desc) = (random_text(rng, n), random_text(rng, d));
                ExtractionRecord::entity(&name, *EntityCategory::ALL.choose(rng).unwrap(), &desc)
            } else {
                let (s, t) = (random_text(rng, 2), random_text(rng, 3));
                let relation = RelationType::ALL.choose(rng).unwrap().as_str();
                let strength = Strength::new(*[3, 5, 7].choose(rng).unwrap()).unwrap();
                ExtractionRecord::relationship(&s, &t, relation, strength)
            }
        })
        .collect()
}

fn mutate(rng: &mut StdRng, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    const PIECES: [&str; 8] = ["<|>", "##", "<|COMPLETE|>", "(", ")", "\"", "9", "\u{fffd}"];
    for _ in 0..rng.gen_range(1..8) {
        let at = rng.gen_range(0..=chars.len());
        match rng.gen_range(0..3) {
            0 if at < chars.len() => {
                chars.remove(at);
            }
            1 => {
                let piece = PIECES.choose(rng).unwrap();
                for (k, c) in piece.chars().enumerate() {
                    chars.insert(at + k, c);
                }
            }
            _ => chars.insert(at, char::from_u32(rng.gen_range(0..0x3000)).unwrap_or('x')),
        }
    }
    chars.into_iter().collect()
}

fn parser_round_trip() -> Outcome {
    let delims = DelimiterSet::default();
    let mut rng = StdRng::seed_from_u64(8);
    for case in 0..1000 {
        let records = random_records(&mut rng);
        let (parsed, diags) = parse_extraction_output(&serialize_records(&records, &delims), &delims);
        check(parsed == records && diags.is_empty(), || {
            format!("case {case}: round trip changed {records:?}")
        })?;
    }
    let mut diagnosed = 0;
    for case in 0..1000 {
        let clean = serialize_records(&random_records(&mut rng), &delims);
        let text = mutate(&mut rng, &clean);
        let result = catch_unwind(AssertUnwindSafe(|| parse_extraction_output(&text, &delims)));
        let (_, diags) = result.map_err(|_| format!("malformed case {case} panicked: {text:?}"))?;
        diagnosed += usize::from(!diags.is_empty());
    }
    Ok(format!(
        "1000 round trips, 1000 malformed inputs ({diagnosed} diagnosed)"
    ))
}

fn toy_grpo() -> Outcome {
    let start = Instant::now();
    let reward = path_reward(RewardConfig::default());
    let mut finals = Vec::new();
    for seed in 0..5 {
        let items = synthetic_rl_items(50, seed);
        let cfg = GrpoConfig {
            seed,
            ..GrpoConfig::default()
        };
        let mut policy = TabularToyPolicy::new();
        let stats = run_training(&items, &mut policy, &reward, &cfg).map_err(|e| e.to_string())?;
        let (initial, last) = (
            stats.initial_accuracy.unwrap_or(0.0),
            stats.final_accuracy().unwrap_or(0.0),
        );
        check((initial - 0.25).abs() < 1e-12, || {
            format!("seed {seed}: baseline {initial}")
        })?;
        check(last >= 0.9, || format!("seed {seed}: final accuracy {last}"))?;
        finals.push(format!("{last:.3}"));
    }

    let items = synthetic_rl_items(50, 0);
    let constant = |item: &QaItem, c: &pathwise_core::reward::Completion| RewardBreakdown {
        total: 0.5,
        ..score_completion(c, item, &RewardConfig::default())
    };
    let constant: &RewardFn<'_> = &constant;
    let mut policy = TabularToyPolicy::new();
    run_training(&items, &mut policy, constant, &GrpoConfig::default()).map_err(|e| e.to_string())?;
    check(policy == TabularToyPolicy::new(), || {
        "constant rewards moved the policy".into()
    })?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "final accuracy per seed [{}]; constant rewards: unchanged",
        finals.join(", ")
    ))
}

fn small_graph() -> KnowledgeGraph {
    let mut b = GraphBuilder::new();
    for t in random_graph(120, 300, 4).triples() {
        b.add_triple(t.clone()).unwrap();
    }
    b.add_entity(&entity_name(999), EntityCategory::Process).unwrap();
    b.freeze()
}

fn determinism() -> Outcome {
    let graph = small_graph();
    let targets = [
        StratumTarget {
            hops: 2,
            count: Some(40),
            rl: 20,
            split: Split::Sft,
        },
        StratumTarget {
            hops: 3,
            count: Some(20),
            rl: 0,
            split: Split::Eval,
        },
    ];
    let render = || -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let sampled = sample_curriculum(&graph, &targets, &PruningConfig::default(), 9).map_err(|e| e.to_string())?;
        let items =
            generate_items(&graph, &sampled.stubs, GenerationMode::Template, 9, 4).map_err(|e| e.to_string())?;
        let manifest = pathwise_core::curriculum::finalize_manifest(&sampled.manifest, &items);
        write_curriculum(dir.path(), &manifest, &items.items).map_err(|e| e.to_string())?;
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .map_err(|e| e.to_string())?
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        Ok(files)
    };
    let first = render()?;
    check(first.len() == 4 && first == render()?, || {
        "curriculum files differ between runs".into()
    })?;

    let train = || -> Result<(String, String), String> {
        let items = synthetic_rl_items(50, 2);
        let cfg = GrpoConfig {
            seed: 2,
            ..GrpoConfig::default()
        };
        let mut policy = TabularToyPolicy::new();
        let stats = run_training(&items, &mut policy, &path_reward(RewardConfig::default()), &cfg)
            .map_err(|e| e.to_string())?;
        Ok((
            stats.to_jsonl(),
            serde_json::to_string(&policy).map_err(|e| e.to_string())?,
        ))
    };
    let a = train()?;
    check(a == train()?, || "GRPO statistics differ between runs".into())?;
    Ok(format!(
        "{} curriculum files and {} GRPO records identical",
        first.len(),
        a.0.lines().count()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("degradation rate on reference rows", degradation_rates),
        ("per-step error fit", per_step_error),
        ("reward bounds fuzz", reward_fuzz),
        ("path reward worked values", worked_values),
        ("group advantage properties", advantage_properties),
        ("path enumeration oracle", path_oracle),
        ("consensus accounting", consensus_accounting),
        ("graph stats at reference size", graph_stats),
        ("extraction parser round trip", parser_round_trip),
        ("toy GRPO convergence", toy_grpo),
        ("seeded determinism", determinism),
    ];
    println!();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        let result = catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                println!("FAIL  {name} ({secs:.2}s): {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
