mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use daf::dataset::load_native;
use daf::report::{read_records, Record};
use serde_json::Value;

fn daf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daf")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = daf(args);
    assert!(
        out.status.success(),
        "daf {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Env {
    dir: tempfile::TempDir,
    data: String,
    stub: String,
    eq: String,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let files = common::synthetic(20, 11).write(dir.path());
        Self {
            data: files.data.display().to_string(),
            stub: format!("stub:{}", files.stub.display()),
            eq: format!("stub:{}", files.equivalence.display()),
            dir,
        }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }
}

fn kinds(path: &str) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["kind"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn error_record_on_bad_record() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.jsonl");
    fs::write(
        &p,
        r#"{"id":"x","context":"c","question":"q","options":["a","b","c","d"],"answer_index":4}"#,
    )
    .unwrap();
    let out = daf(&["score", "--data", &p.display().to_string(), "--backend", "stub:none.json"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "record");
    assert!(err["error"]["message"].as_str().unwrap().contains("answer index out of range"));
}

#[test]
fn error_record_on_missing_backend() {
    let env = Env::new();
    let out = daf(&["score", "--data", &env.data, "--backend", "nonesuch"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "unknown_backend");
}

#[test]
fn score_writes_questions_then_summary() {
    let env = Env::new();
    let out = env.path("r.jsonl");
    ok(&["score", "--data", &env.data, "--backend", &env.stub, "--equivalence", &env.eq, "--out", &out]);
    let k = kinds(&out);
    assert_eq!(k.len(), 21);
    assert!(k[..20].iter().all(|k| k == "question"));
    assert_eq!(k[20], "summary");
    let summary: Value = serde_json::from_str(fs::read_to_string(&out).unwrap().lines().last().unwrap()).unwrap();
    let display = &summary["display"]["overall"];
    let acc = summary["report"]["overall"]["accuracy"].as_f64().unwrap();
    assert_eq!(display["accuracy"], format!("{acc:.1}"));
    assert!(summary["report"]["per_level"]["B1"].is_object());
}

#[test]
fn flags_override_config_file() {
    let env = Env::new();
    let cfg = env.path("run.toml");
    let stub_path = env.stub.trim_start_matches("stub:");
    fs::write(
        &cfg,
        format!(
            "data = {:?}\ntau = 0.04\nbackends = [\"m\"]\nequivalence = {:?}\n[backend.m]\nkind = \"stub\"\npath = {:?}\n",
            env.data, env.eq, stub_path
        ),
    )
    .unwrap();
    let a = env.path("a.jsonl");
    let b = env.path("b.jsonl");
    ok(&["score", "--config", &cfg, "--out", &a]);
    ok(&["score", "--config", &cfg, "--tau", "0.9", "--out", &b]);
    let tau = |p: &str| match read_records(Path::new(p)).unwrap().pop().unwrap() {
        Record::Summary(s) => s.run.tau,
        _ => panic!("no summary"),
    };
    assert_eq!(tau(&a), 0.04);
    assert_eq!(tau(&b), 0.9);
}

#[test]
fn filter_output_reloads() {
    let env = Env::new();
    let out = env.path("kept.jsonl");
    ok(&["filter", "--data", &env.data, "--backend", &env.stub, "--tau", "0.5", "--out", &out]);
    let kept = load_native(Path::new(&out)).unwrap();
    let original = load_native(Path::new(&env.data)).unwrap();
    assert!(kept.len() <= original.len());
    for q in &kept {
        let o = original.get(&q.id).unwrap();
        assert_eq!(q.answer(), o.answer());
        assert!(q.options.len() <= o.options.len());
    }
}

#[test]
fn sweep_boundaries() {
    let env = Env::new();
    let out = env.path("sweep.jsonl");
    ok(&["sweep", "--data", &env.data, "--backend", &env.stub, "--grid", "0,0.25,1", "--out", &out]);
    let rows: Vec<_> = read_records(Path::new(&out))
        .unwrap()
        .into_iter()
        .map(|r| match r {
            Record::Sweep(s) => s,
            _ => panic!("unexpected record"),
        })
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].incorrectness_rate, 0.0);
    assert!(rows[0].incorrectness_rate <= rows[1].incorrectness_rate);
    assert!(rows[1].incorrectness_rate <= rows[2].incorrectness_rate);
    // every sigmoid output of a finite logit is below 1
    assert_eq!(rows[2].incorrectness_rate, 100.0);
}

#[test]
fn validate_emits_tables() {
    let env = Env::new();
    let scored = env.path("r.jsonl");
    ok(&["score", "--data", &env.data, "--backend", &env.stub, "--out", &scored]);
    let a = env.path("v1.jsonl");
    let b = env.path("v2.jsonl");
    ok(&["validate", "--data", &env.data, "--backend", &env.stub, "--out", &a]);
    ok(&["validate", "--data", &env.data, "--reports", &scored, "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let k = kinds(&a);
    for kind in ["pr_point", "best", "chart", "intra_correlation", "inter_correlation"] {
        assert!(k.iter().any(|x| x == kind), "missing {kind}");
    }
    assert_eq!(k.iter().filter(|x| *x == "best").count(), 2);
    assert_eq!(k.iter().filter(|x| *x == "chart").count(), 21);
}

#[test]
fn probe_echo_matches_score_and_caches() {
    let env = Env::new();
    let scored = env.path("r.jsonl");
    ok(&["score", "--data", &env.data, "--backend", &env.stub, "--equivalence", &env.eq, "--out", &scored]);
    let probed = env.path("p.jsonl");
    let cache = env.path("cache");
    ok(&[
        "probe", "--data", &env.data, "--backend", &env.stub, "--equivalence", &env.eq, "--directive", "plaus+",
        "--mock", "echo", "--cache", &cache, "--out", &probed,
    ]);
    let score_summary = match read_records(Path::new(&scored)).unwrap().pop().unwrap() {
        Record::Summary(s) => s,
        _ => panic!(),
    };
    let probe_records = read_records(Path::new(&probed)).unwrap();
    let probe_summary = probe_records
        .iter()
        .find_map(|r| match r {
            Record::ProbeSummary(p) => Some(p.clone()),
            _ => None,
        })
        .unwrap();
    assert_eq!(probe_summary.report, score_summary.report);
    assert_eq!(probe_summary.vanilla_accuracy, score_summary.report.overall.accuracy);
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 20);

    // offline from the cache reproduces the run byte for byte
    let again = env.path("p2.jsonl");
    ok(&[
        "probe", "--data", &env.data, "--backend", &env.stub, "--equivalence", &env.eq, "--directive", "plaus+",
        "--offline", "--cache", &cache, "--out", &again,
    ]);
    assert_eq!(fs::read(&probed).unwrap(), fs::read(&again).unwrap());

    // a different directive misses the cache
    let out = daf(&[
        "probe", "--data", &env.data, "--backend", &env.stub, "--directive", "div-", "--offline", "--cache", &cache,
    ]);
    assert!(!out.status.success());
}

#[test]
fn probe_fixture_failure_keeps_partial_results() {
    let env = Env::new();
    let fixture = env.path("fx.jsonl");
    fs::write(
        &fixture,
        "{\"id\":\"s00\",\"directive\":\"div+\",\"response\":\"1. x\\n2. y\\n3. z\"}\n{\"id\":\"s01\",\"directive\":\"div+\",\"error\":\"rate limited\"}\n",
    )
    .unwrap();
    let out_path = env.path("p.jsonl");
    let out = daf(&[
        "probe", "--data", &env.data, "--backend", &env.stub, "--directive", "div+", "--mock", &fixture, "--out",
        &out_path,
    ]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("rate limited"));
    let partial = read_records(Path::new(&out_path)).unwrap();
    assert_eq!(partial.len(), 1);
    assert!(matches!(&partial[0], Record::Refinement(r) if r.original_id == "s00"));
}

#[test]
fn report_compares_two_files() {
    let env = Env::new();
    let a = env.path("a.jsonl");
    let b = env.path("b.jsonl");
    ok(&["score", "--data", &env.data, "--backend", &env.stub, "--equivalence", &env.eq, "--out", &a]);
    ok(&["score", "--data", &env.data, "--backend", &env.stub, "--out", &b]);
    let out_path = env.path("cmp.jsonl");
    let out = ok(&["report", &a, &b, "--data", &env.data, "--out", &out_path]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("overall") && text.contains("total"));
    let records = read_records(Path::new(&out_path)).unwrap();
    let same = records.iter().filter(|r| matches!(r, Record::Comparison { .. })).count();
    assert_eq!(same, 2);
    assert_eq!(records.iter().filter(|r| matches!(r, Record::Histogram { .. })).count(), 4);
    for r in &records {
        if let Record::Histogram { counts, .. } = r {
            let n: usize = counts.iter().sum();
            assert!(n == 20 || n == 16, "histogram total {n}");
        }
    }
}

#[test]
fn stats_and_sampling() {
    let env = Env::new();
    let out = ok(&["stats", "--data", &env.data, "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "stats");
    assert_eq!(v["total_questions"], 20);
    let a = env.path("a.jsonl");
    let b = env.path("b.jsonl");
    for p in [&a, &b] {
        ok(&["score", "--data", &env.data, "--backend", &env.stub, "--sample", "7", "--seed", "3", "--out", p]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(kinds(&a).len(), 8);
}
