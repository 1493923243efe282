use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(format!("{name}.trace"))
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpurace")).args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gpurace"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn barrier_separated_is_clean() {
    let o = run(&["check", &corpus("barrier-separated"), "--detector", "gwcp"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn wcp_classic_compare_line() {
    let o = run(&["compare", &corpus("wcp-classic")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "gwcp:1 hb:0 lockset:0 oracle:1\n");
}

#[test]
fn reports_are_ndjson_with_stable_fields() {
    let o = run(&["check", &corpus("no-cp")]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(!text.is_empty());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["class", "confidence", "current", "detector", "kind", "location", "prior"]);
        assert_eq!(v["detector"], "gwcp");
        assert!(v["prior"]["event"].as_u64() < v["current"]["event"].as_u64());
    }
}

#[test]
fn order_matrix_line_follows_reports() {
    let o = run(&["check", &corpus("wcp-classic"), "--detector", "hb", "--order-matrix"]);
    let last = stdout(&o).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(v["order"]["detector"], "hb");
    assert!(v["order"]["ordered"].is_array());
    let o = run(&["check", &corpus("wcp-classic"), "--detector", "lockset", "--order-matrix"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["check", "/nonexistent/file.trace"]).status.code(), Some(2));
    assert_eq!(run_stdin(&["check", "-"], "config blocks=1\nbogus line\n").status.code(), Some(2));
    // releasing a lock that is not held is a validation error
    let o = run_stdin(&["check", "-"], "config blocks=1 warps=1 lanes=1\n0.0.0 rel 0x1 device\n");
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
    assert_eq!(run(&["gen", "no-such-trace"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "random"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "random", "--seed", "1", "--events", "31"]).status.code(), Some(2));
}

#[test]
fn oracle_respects_limit() {
    let o = run(&["oracle", &corpus("warp-lock")]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["oracle", &corpus("warp-lock"), "--limit", "40"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["complete"], true);
    assert_eq!(v["pairs"], serde_json::json!([]));
}

#[test]
fn generated_traces_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["wcp-classic", "same-instr-intrawarp", "partial-warp-barrier"] {
        let o = run(&["gen", name]);
        assert!(o.status.success());
        let path = dir.path().join(format!("{name}.trace"));
        std::fs::write(&path, &o.stdout).unwrap();
        let from_file = run(&["compare", path.to_str().unwrap(), "--json"]);
        let from_corpus = run(&["compare", &corpus(name), "--json"]);
        assert_eq!(from_file.stdout, from_corpus.stdout, "{name}");
    }
    let o = run(&["gen", "random", "--seed", "42", "--events", "20"]);
    let path = dir.path().join("random.trace");
    std::fs::write(&path, &o.stdout).unwrap();
    assert!(matches!(run(&["check", path.to_str().unwrap()]).status.code(), Some(0 | 1)));
}

#[test]
fn listing_has_every_corpus_trace() {
    let o = run(&["gen", "--list", "--json"]);
    let names: Vec<String> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names.len(), gpurace::workloads::CORPUS.len());
    assert!(names.iter().any(|n| n == "warp-lock"));
}

#[test]
fn stats_reports_counters() {
    let o = run(&["stats", &corpus("warp-lock")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["events"].as_u64(), Some(v["timeline"].as_array().unwrap().len() as u64));
    assert_eq!(v["last"]["warps_expanded"], 0);
}
