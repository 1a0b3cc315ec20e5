use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_pathwise");

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

/// A scratch copy of the demo corpus, judge rules and config.
fn workspace() -> TempDir {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["corpus", "judges"] {
        fs::create_dir_all(tmp.path().join(sub)).unwrap();
        for entry in fs::read_dir(demo_dir().join(sub)).unwrap() {
            let entry = entry.unwrap();
            fs::copy(entry.path(), tmp.path().join(sub).join(entry.file_name())).unwrap();
        }
    }
    fs::copy(demo_dir().join("pathwise.toml"), tmp.path().join("pathwise.toml")).unwrap();
    tmp
}

fn pathwise(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(["--config", "pathwise.toml"])
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pathwise(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_dir(dir: &Path) -> PathBuf {
    let runs: Vec<PathBuf> = fs::read_dir(dir.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(runs.len(), 1, "{runs:?}");
    runs.into_iter().next().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn through_curriculum(dir: &Path) {
    for stage in ["chunk", "extract", "validate", "curriculum"] {
        ok(dir, &[stage]);
    }
}

/// Relative path to contents for every file under `root`.
fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_mock_pipeline() {
    let ws = workspace();
    let dir = ws.path();
    through_curriculum(dir);
    let run = run_dir(dir);

    let validate: Value = serde_json::from_slice(&fs::read(run.join("validate/stats.json")).unwrap()).unwrap();
    assert_eq!(validate["rejected"], 2, "each judge vetoes one triple");
    assert_eq!(
        validate["candidates"].as_u64().unwrap(),
        validate["validated"].as_u64().unwrap() + 2
    );

    fs::write(
        dir.join("proposals.jsonl"),
        concat!(
            r#"{"head":"CA1","head_category":"AnatomicalStructure","relation":"projects_to","tail":"prefrontal cortex","tail_category":"AnatomicalStructure","provenance":"review","strength":5,"status":"candidate"}"#,
            "\n",
            r#"{"head":"ca3","head_category":"AnatomicalStructure","relation":"projects_to","tail":"ca1","tail_category":"AnatomicalStructure","provenance":"review","strength":5,"status":"candidate"}"#,
            "\n"
        ),
    )
    .unwrap();
    ok(dir, &["expand-ingest", "--proposals", "proposals.jsonl"]);
    let report: Value = serde_json::from_slice(&fs::read(run.join("expand/report.json")).unwrap()).unwrap();
    assert_eq!(
        (report["added"].as_u64(), report["duplicate"].as_u64()),
        (Some(1), Some(1))
    );

    let stats: Value = serde_json::from_str(&ok(dir, &["stats"])).unwrap();
    assert_eq!(stats["triple_count"], report["merged_triples"]);
    ok(dir, &["paths", "--max-hops", "3"]);

    let items: Vec<Value> = lines(&run.join("curriculum/hop2-rl.jsonl"));
    assert_eq!(items.len(), 24);
    let requests: String = items
        .iter()
        .take(3)
        .map(|i| {
            let raw = format!(
                "<think>\n{}\n</think>\n<answer>{}</answer>",
                i["cot_trace"].as_str().unwrap(),
                i["gold"].as_str().unwrap()
            );
            serde_json::json!({"item_id": i["id"], "raw_completion": raw}).to_string() + "\n"
        })
        .collect();
    fs::write(dir.join("requests.jsonl"), requests).unwrap();
    ok(dir, &["score", "--input", "requests.jsonl"]);
    for s in lines(&run.join("score/scores.jsonl")) {
        assert_eq!(s["r_correct"], 1.0);
        assert!(s["r_path"].as_f64().unwrap() > 0.0);
    }

    ok(dir, &["grpo"]);
    let summary: Value = serde_json::from_slice(&fs::read(run.join("grpo/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], summary["planned_steps"]);
    assert!(summary["final_accuracy"].as_f64().unwrap() > summary["initial_accuracy"].as_f64().unwrap());

    for stage in [
        "chunks",
        "extract",
        "validate",
        "expand",
        "stats",
        "paths",
        "curriculum",
        "score",
        "grpo",
    ] {
        let manifest: Value =
            serde_json::from_slice(&fs::read(run.join(stage).join("run_manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 17);
        assert!(run.ends_with(format!("run-{}", manifest["config_hash"].as_str().unwrap())));
        assert!(!manifest["outputs"].as_array().unwrap().is_empty(), "{stage}");
    }
}

#[test]
fn quiz_bundle_response_log_feeds_eval() {
    let ws = workspace();
    let dir = ws.path();
    through_curriculum(dir);
    ok(dir, &["quiz-export", "--split", "eval"]);
    let bundle = run_dir(dir).join("quiz/bundle");
    let metadata: Value = serde_json::from_slice(&fs::read(bundle.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(metadata["item_count"], 36);

    // A participant who always answers correctly at 3 hops and never at 5.
    let mut log = String::new();
    for entry in metadata["strata"].as_array().unwrap() {
        for item in lines(&bundle.join(entry["file"].as_str().unwrap())) {
            let hops = item["hops"].as_u64().unwrap();
            let gold = item["gold"].as_str().unwrap();
            let chosen = if hops == 5 {
                if gold == "A" {
                    "B"
                } else {
                    "A"
                }
            } else {
                gold
            };
            let line = serde_json::json!({
                "item_id": item["id"],
                "hops": hops,
                "gold": gold,
                "raw_completion": format!("<answer>{chosen}</answer>"),
            });
            log.push_str(&(line.to_string() + "\n"));
        }
    }
    fs::write(dir.join("human.jsonl"), log).unwrap();
    let table = ok(dir, &["eval", "--input", "human=human.jsonl"]);
    assert!(table.contains("| human | 100.0 | 100.0 | 0.0 |"), "{table}");
    let report: Value = serde_json::from_slice(&fs::read(run_dir(dir).join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report[0]["delta"], 50.0);
    let csv = fs::read_to_string(run_dir(dir).join("eval/accuracy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn curriculum_is_byte_identical_across_runs() {
    let a = workspace();
    let b = workspace();
    through_curriculum(a.path());
    through_curriculum(b.path());
    let (ra, rb) = (run_dir(a.path()), run_dir(b.path()));
    assert_eq!(ra.file_name(), rb.file_name());
    let sa = snapshot(&ra.join("curriculum"));
    assert!(sa.len() >= 5);
    assert_eq!(sa, snapshot(&rb.join("curriculum")));
}

#[test]
fn synthetic_grpo_is_deterministic_with_one_record_per_step() {
    let a = workspace();
    let b = workspace();
    ok(a.path(), &["grpo", "--synthetic", "50"]);
    ok(b.path(), &["grpo", "--synthetic", "50"]);
    let stats_a = fs::read(run_dir(a.path()).join("grpo/train_stats.jsonl")).unwrap();
    let stats_b = fs::read(run_dir(b.path()).join("grpo/train_stats.jsonl")).unwrap();
    assert_eq!(stats_a, stats_b);
    // 3 epochs of ceil(50 / 16) = 4 steps.
    let records = lines(&run_dir(a.path()).join("grpo/train_stats.jsonl"));
    assert_eq!(records.len(), 12);
    assert_eq!(records.last().unwrap()["epoch"], 2);
    assert_eq!(
        fs::read(run_dir(a.path()).join("grpo/transcripts.jsonl")).unwrap(),
        fs::read(run_dir(b.path()).join("grpo/transcripts.jsonl")).unwrap()
    );
}

#[test]
fn stats_reports_counts_and_average_degree() {
    let ws = workspace();
    let dir = ws.path();
    let triple = |h: &str, r: &str, t: &str| {
        serde_json::json!({
            "head": h, "head_category": "AnatomicalStructure", "relation": r,
            "tail": t, "tail_category": "AnatomicalStructure", "provenance": "fixture",
            "strength": 5, "status": "validated"
        })
        .to_string()
    };
    let graph = [
        triple("a", "projects_to", "b"),
        triple("b", "projects_to", "c"),
        triple("c", "projects_to", "d"),
        r#"{"entity":"isolated","category":"ClinicalEntity"}"#.to_string(),
    ]
    .join("\n");
    fs::write(dir.join("g.jsonl"), graph).unwrap();
    let stats: Value = serde_json::from_str(&ok(dir, &["stats", "--graph", "g.jsonl"])).unwrap();
    assert_eq!(stats["node_count"], 5);
    assert_eq!(stats["triple_count"], 3);
    assert_eq!(stats["avg_degree"], 0.6);
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let ws = workspace();
    let dir = ws.path();
    assert_eq!(code(&pathwise(dir, &["--help"])), 0);
    assert_eq!(code(&pathwise(dir, &["--version"])), 0);
    assert_eq!(code(&pathwise(dir, &["frobnicate"])), 1);
    assert_eq!(code(&pathwise(dir, &["eval"])), 1);

    let missing = pathwise(dir, &["curriculum"]);
    assert_eq!(code(&missing), 2);
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert!(
        stderr.contains("seed_kg.jsonl") && stderr.contains("pathwise validate"),
        "{stderr}"
    );

    fs::write(dir.join("bad.toml"), "[grpo]\nclip_epsilon = 0.2\nlearnig_rate = 1.0\n").unwrap();
    let bad = Command::new(BIN)
        .current_dir(dir)
        .args(["-c", "bad.toml", "stats"])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("learnig_rate"));

    // Real judges behind an endpoint that refuses connections.
    fs::write(
        dir.join("remote.toml"),
        concat!(
            "[judges.judge_a]\nbase_url = \"http://127.0.0.1:9\"\nmodel = \"a\"\ntimeout_secs = 2\n",
            "retry = { max_retries = 0, initial_backoff_ms = 1 }\n",
            "[judges.judge_b]\nbase_url = \"http://127.0.0.1:9\"\nmodel = \"b\"\ntimeout_secs = 2\n",
            "retry = { max_retries = 0, initial_backoff_ms = 1 }\n",
        ),
    )
    .unwrap();
    ok(dir, &["chunk"]);
    ok(dir, &["extract"]);
    let candidates = run_dir(dir).join("extract/candidates.jsonl");
    let remote = Command::new(BIN)
        .current_dir(dir)
        .args(["-c", "remote.toml", "validate", "--candidates"])
        .arg(&candidates)
        .output()
        .unwrap();
    assert_eq!(code(&remote), 3, "{}", String::from_utf8_lossy(&remote.stderr));

    let unconfigured = Command::new(BIN)
        .current_dir(dir)
        .args(["-c", "bad.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&unconfigured), 1);
}
