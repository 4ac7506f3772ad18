use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rallyscope::domain::{MatchRecord, StrokeType};
use rallyscope::ingest::{build_matches, parse_annotations};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rallyscope"));
    c.env_remove("COACH_REMOTE_ENDPOINT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulated(dir: &Path, seed: &str) -> PathBuf {
    let csv = dir.join("ann.csv");
    ok(&["simulate", "--out", p(&csv), "--seed", seed, "--rallies", "16"]);
    csv
}

fn load(csv: &Path) -> Vec<MatchRecord> {
    build_matches(parse_annotations(fs::File::open(csv).unwrap()).unwrap()).unwrap()
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn oracle_pipeline_scores_perfectly() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "5");
    let data = tmp.path().join("data");
    let printed = ok(&["gen-data", "--annotations", p(&csv), "--out", p(&data), "--seed", "9"]);
    assert!(printed.contains("ActionClassification: 16"), "{printed}");
    let pred = tmp.path().join("pred");
    ok(&["qa", "--annotations", p(&csv), "--qa", p(&data.join("qa.jsonl")), "--out", p(&pred)]);
    for f in ["predictions.jsonl", "answers.jsonl", "trace.jsonl"] {
        assert!(pred.join(f).exists(), "{f}");
    }
    let report = tmp.path().join("report");
    ok(&[
        "eval",
        "--qa",
        p(&data.join("qa.jsonl")),
        "--predictions",
        p(&pred.join("predictions.jsonl")),
        "--out",
        p(&report),
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    let cats = &json["categories"];
    assert_eq!(cats["ActionClassification"]["em_pct"], 100.0);
    assert_eq!(cats["ActionCount"]["em_pct"], 100.0);
    assert_eq!(cats["TemporalLocalization"]["em_pct"], 100.0);
    assert!(fs::read_to_string(report.join("table.txt")).unwrap().contains("100.00"));
}

#[test]
fn localization_fixture_replays() {
    let root = repo_root().join("fixtures/localization_replay");
    let out = ok(&[
        "eval",
        "--qa",
        p(&root.join("qa.jsonl")),
        "--predictions",
        p(&root.join("predictions.jsonl")),
    ]);
    for (label, value) in [
        ("hit@1", "87.28"),
        ("EM", "72.31"),
        ("Precision", "86.95"),
        ("Recall", "84.65"),
        ("F1-Score", "84.77"),
        ("NQA", "91.80"),
    ] {
        let line = out
            .lines()
            .find(|l| l.trim_start().starts_with(label) && l.contains(value));
        assert!(line.is_some(), "{label} {value} missing from\n{out}");
    }
}

#[test]
fn smash_highlights_cover_every_smash() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "21");
    let m = &load(&csv)[0];
    let out = tmp.path().join("sum");
    ok(&[
        "summarize",
        "--annotations",
        p(&csv),
        "--query",
        "highlight all smashes",
        "--pad-before",
        "0",
        "--pad-after",
        "0",
        "--out",
        p(&out),
    ]);
    let edl: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("edl.json")).unwrap()).unwrap();
    let entries = edl["entries"].as_array().unwrap();
    let labels: usize = entries
        .iter()
        .map(|e| e["segment"]["label"].as_str().unwrap().split(", ").count())
        .sum();
    let smashes: Vec<(usize, &str, u32)> = m
        .rallies
        .iter()
        .enumerate()
        .flat_map(|(k, r)| {
            r.strokes
                .iter()
                .filter(|s| s.stroke_type == StrokeType::Smash)
                .map(move |s| (k, r.rally_id.as_str(), s.stroke_index))
        })
        .collect();
    // Without pads, consecutive smashes in one rally share a boundary and merge.
    let runs = smashes
        .iter()
        .filter(|(k, _, i)| !smashes.iter().any(|(k2, _, j)| k2 == k && j + 1 == *i))
        .count();
    assert!(!smashes.is_empty());
    assert_eq!(labels, smashes.len());
    assert_eq!(entries.len(), runs);
    let command: Vec<String> = serde_json::from_str(&fs::read_to_string(out.join("command.json")).unwrap()).unwrap();
    assert_eq!(command[0], "ffmpeg");
    assert_eq!(command.iter().filter(|t| *t == "-i").count(), entries.len());
}

#[test]
fn summarize_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "8");
    let dirs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("run{i}"))).collect();
    for d in &dirs {
        ok(&[
            "summarize",
            "--annotations",
            p(&csv),
            "--query",
            "make a highlight reel of smashes and drops by the upper player",
            "--parallelism",
            "8",
            "--max-chunk-strokes",
            "24",
            "--out",
            p(d),
        ]);
    }
    for f in ["script.json", "edl.json", "edl.csv", "command.json", "trace.jsonl"] {
        let a = fs::read(dirs[0].join(f)).unwrap();
        let b = fs::read(dirs[1].join(f)).unwrap();
        assert!(!a.is_empty(), "{f} empty");
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn gen_data_is_seeded() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "3");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&["gen-data", "--annotations", p(&csv), "--out", p(&a), "--seed", "1"]);
    ok(&["gen-data", "--annotations", p(&csv), "--out", p(&b), "--seed", "1"]);
    ok(&["gen-data", "--annotations", p(&csv), "--out", p(&c), "--seed", "2"]);
    let read = |d: &Path| fs::read(d.join("qa.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn ingested_store_is_accepted_as_input() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "4");
    let store = tmp.path().join("store");
    ok(&["ingest", "--annotations", p(&csv), "--out", p(&store)]);
    let answer = ok(&[
        "qa",
        "--annotations",
        p(&store.join("matches.jsonl")),
        "--query",
        "How many strokes in rally r002 were smashes?",
    ]);
    assert!(answer.contains("occurred in this rally"), "{answer}");
}

#[test]
fn config_errors_exit_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "1");
    let out = tmp.path().join("never");
    let cases: Vec<Vec<&str>> = vec![
        vec!["--backend", "gpt"],
        vec!["--parallelism", "0"],
        vec!["--pad-before", "-1"],
        vec!["--backend", "scripted:/does/not/exist.json"],
        vec!["--rules", "/does/not/exist.json"],
    ];
    for extra in cases {
        let mut args = vec!["summarize", "--annotations", p(&csv), "--query", "highlight smashes", "--out", p(&out)];
        args.extend(extra.iter().copied());
        let res = run(&args);
        assert_eq!(res.status.code(), Some(2), "{extra:?}");
        assert!(!out.exists(), "{extra:?} left an output directory");
    }
    let res = run(&["ingest", "--annotations", "/does/not/exist.csv", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn invalid_annotations_exit_3_with_violations() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("bad.csv");
    fs::write(
        &csv,
        "match_id,rally_id,stroke_index,time_s,player,stroke_type,court_zone\n\
         m,r1,1,1.0,Top,smash,rear-left\n\
         m,r1,2,0.5,Top,drop,front-left\n",
    )
    .unwrap();
    let out = tmp.path().join("o");
    let res = run(&["ingest", "--annotations", p(&csv), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(3));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("serve") && err.contains("alternation"), "{err}");
    assert!(!out.exists());
}

#[test]
fn backend_failures_exit_4() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "2");
    let fixture = tmp.path().join("down.json");
    fs::write(&fixture, r#"{"fallback": "unavailable", "rules": []}"#).unwrap();
    let backend = format!("scripted:{}", p(&fixture));
    let res = run(&["qa", "--annotations", p(&csv), "--query", "How many smashes in rally r001?", "--backend", &backend]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
    let res = run(&[
        "summarize",
        "--annotations",
        p(&csv),
        "--query",
        "highlight smashes",
        "--backend",
        &backend,
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(res.status.code(), Some(4));

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let res = run(&[
        "qa",
        "--annotations",
        p(&csv),
        "--query",
        "How many smashes in rally r001?",
        "--backend",
        &format!("remote:http://127.0.0.1:{port}/"),
        "--retries",
        "0",
    ]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn scripted_fixture_overrides_the_orchestrator() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "2");
    let fixture = tmp.path().join("fx.json");
    fs::write(
        &fixture,
        r#"{"fallback": "oracle", "rules": [{"role": "orchestrator", "instruction_contains": "Task: text_qa",
            "payloads": [{"branch": "text_answer", "answer": "Shuttles are made of feathers.", "sub_queries": null, "reasoning_trace": ""}]}]}"#,
    )
    .unwrap();
    let answer = ok(&[
        "qa",
        "--annotations",
        p(&csv),
        "--query",
        "What are shuttlecocks made of?",
        "--backend",
        &format!("scripted:{}", p(&fixture)),
    ]);
    assert_eq!(answer.trim(), "Shuttles are made of feathers.");
}

#[test]
fn dry_run_prints_wire_requests() {
    let tmp = TempDir::new().unwrap();
    let csv = simulated(tmp.path(), "2");
    let res = bin()
        .args([
            "qa",
            "--annotations",
            p(&csv),
            "--query",
            "How many smashes in rally r001?",
            "--backend",
            "remote:http://127.0.0.1:9/",
            "--dry-run",
        ])
        .env("COACH_REMOTE_ENDPOINT", "http://127.0.0.1:9/override")
        .output()
        .unwrap();
    assert!(res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    let first: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(first["role"], "orchestrator");
    assert!(first["instruction"].as_str().unwrap().contains("Task: rally_qa"));
    assert!(err.lines().any(|l| l.contains("\"role\":\"critic\"")));
    assert!(String::from_utf8_lossy(&res.stdout).contains("occurred in this rally"));
}
