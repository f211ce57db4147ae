use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const NODES: &str = "0\tA\tMarkov chain Monte Carlo sampling
1\tA\tOutperforming the Gibbs sampler with adaptive proposals
2\tB\tProtein folding with neural networks
3\tA\tGibbs sampler convergence diagnostics
4\tB\tDeep learning for structure prediction
5\t-\tAn isolated survey of graph databases
";
const EDGES: &str = "0\t1\n0\t2\n1\t3\n2\t3\n3\t4\n";
const SCRIPT: &str = "--- step 1 ---
<think>The paper is about sampling. Check its neighbors.</think>
<search>mode=local, hop=1, query=\"Gibbs sampler\"</search>
--- step 2 ---
<think>Neighbors are about Gibbs sampling.</think>
<answer>A</answer>
";

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphsearch"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// Writes the fixture files, ingests and indexes them. Returns the index dir.
fn setup(dir: &Path) -> String {
    fs::write(dir.join("n.tsv"), NODES).unwrap();
    fs::write(dir.join("e.tsv"), EDGES).unwrap();
    fs::write(dir.join("s.txt"), SCRIPT).unwrap();
    let idx = s(&dir.join("idx"));
    let o = bin(&[
        "ingest",
        "--nodes",
        &s(&dir.join("n.tsv")),
        "--edges",
        &s(&dir.join("e.tsv")),
        "--out",
        &idx,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("N=6 nodes, E=5 edges"), "{stdout}");
    let o = bin(&["index", "--index", &idx, "--warm", "0,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    idx
}

#[test]
fn ingest_index_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let idx = setup(dir.path());
    let script = s(&dir.path().join("s.txt"));
    let log = dir.path().join("retrieval.jsonl");
    let o = bin(&[
        "run",
        "--index",
        &idx,
        "--script",
        &script,
        "--anchor",
        "0",
        "--retrieval-log",
        &s(&log),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.trim_end().ends_with("<answer>A</answer>"), "{text}");
    assert!(text.contains("<information>"));
    let log = fs::read_to_string(log).unwrap();
    assert_eq!(log.lines().count(), 1);

    let o = bin(&["run", "--index", &idx, "--script", &script, "--anchor", "0", "--json"]);
    assert!(o.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["searches"].as_array().unwrap().len(), 1);
}

#[test]
fn eval_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let idx = setup(dir.path());
    let inst = dir.path().join("inst.tsv");
    fs::write(&inst, "0\tA\n2\tB\n").unwrap();
    let out = dir.path().join("report");
    let o = bin(&[
        "eval",
        "--index",
        &idx,
        "--script",
        &s(&dir.path().join("s.txt")),
        "--instances",
        &s(&inst),
        "--out",
        &s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 2);
    assert_eq!(report["accuracy"], 0.5);
    assert!(out.join("outcomes.csv").is_file());
}

#[test]
fn missing_instances_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let idx = setup(dir.path());
    let o = bin(&["eval", "--index", &idx, "--instances", "definitely-missing.tsv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[ConfigInvalid]"), "{err}");
    assert!(err.contains("instances"), "{err}");
}

#[test]
fn invalid_values_and_commands() {
    let o = bin(&["run", "--anchor", "0", "--alpha", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    let o = bin(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[UnknownCommand]"));

    let o = bin(&["run", "--anchor", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("index"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let idx = setup(dir.path());
    let cfg = dir.path().join("run.conf");
    // The file's bad traversal is overridden by the flag.
    fs::write(
        &cfg,
        format!("# comment\nindex = {idx}\nscript = {}\ntraversal = X\n", s(&dir.path().join("s.txt"))),
    )
    .unwrap();
    let c = s(&cfg);
    let o = bin(&["run", "--config", &c, "--anchor", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("traversal"));
    let o = bin(&["run", "--config", &c, "--anchor", "0", "--traversal", "R"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("traversal: R"));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = bin(&["run", "--config", &c, "--anchor", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn help_lists_defaults() {
    let o = bin(&["run", "--help"]);
    assert!(o.status.success());
    let help = String::from_utf8_lossy(&o.stdout);
    for needle in ["[default: 3]", "[default: 0.85]", "[default: 8]", "--max-search-steps"] {
        assert!(help.contains(needle), "missing {needle}");
    }
}

#[test]
fn bench_small_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let o = bin(&["bench", "--synthetic", "500", "--queries", "50", "--out", &s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(rep["second"]["scored_min"], 499);
}
