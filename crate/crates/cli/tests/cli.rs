use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linkmatch"))
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn pipe(input: &[u8], args: &[&str]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn golden_run_ends_locked() {
    let init = format!("file:{}", fixture("fig1a.json"));
    let o = run(&["run", "--graph", &fixture("k2.edges"), "--init", &init, "--daemon", "sequential", "--seed", "0"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["outcome"], "stable");
    assert_eq!(last["moves"], 13);
    for reg in ["0->1", "1->0"] {
        assert_eq!(last["final"]["registers"][reg], serde_json::json!({"p": "You", "m": 2}));
    }
    assert_eq!(last["final"]["nodes"]["0"], serde_json::json!({"p": 1, "m": 2}));
    assert_eq!(last["final"]["nodes"]["1"], serde_json::json!({"p": 0, "m": 2}));
}

#[test]
fn run_pipes_into_check_trace() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    let o = run(&["gen-graph", "gnp", "--n", "15", "--p", "0.3", "--seed", "4", "--out", graph.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for daemon in ["adv-random", "sequential", "synchronous", "greedy"] {
        let o = run(&["run", "--graph", graph.to_str().unwrap(), "--daemon", daemon, "--seed", "3"]);
        assert_eq!(code(&o), 0);
        let checked = pipe(&o.stdout, &["check-trace", "--in", "-"]);
        assert_eq!(code(&checked), 0, "{}", String::from_utf8_lossy(&checked.stderr));
        let report: serde_json::Value = serde_json::from_slice(&checked.stdout).unwrap();
        let names: Vec<&str> = report.as_array().unwrap().iter().map(|m| m["monitor"].as_str().unwrap()).collect();
        for m in ["reset-pairing", "closure", "stable-registers", "replay"] {
            assert!(names.contains(&m), "{m} missing from {names:?}");
        }
    }
}

#[test]
fn forged_trace_fails_reset_pairing() {
    let o = run(&["check-trace", "--in", &fixture("forged_m2.jsonl")]);
    assert_eq!(code(&o), 1);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let m2 = report.as_array().unwrap().iter().find(|m| m["monitor"] == "reset-pairing").unwrap();
    assert_eq!(m2["pass"], false);
    assert_eq!(m2["step"], 2);
    assert_eq!(m2["node"], 0);
}

#[test]
fn modelcheck_k2() {
    let o = run(&["modelcheck", "--graph", &fixture("k2.edges")]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["has_cycle"], false);
    assert_eq!(r["all_sinks_legitimate"], true);
    assert_eq!(r["state_count"], 1296);
    let o = run(&["modelcheck", "--graph", &fixture("k2.edges"), "--full"]);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["state_count"], 2916);
}

#[test]
fn modelcheck_needs_big_for_path3() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("p3.edges");
    std::fs::write(&graph, "0 1\n1 2\n").unwrap();
    let o = run(&["modelcheck", "--graph", graph.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--big"));
}

#[test]
fn replay_golden_script() {
    let init = format!("file:{}", fixture("fig1a.json"));
    let o = run(&["replay", "--graph", &fixture("k2.edges"), "--init", &init, "--script", &fixture("fig1_script.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 15);
    // From the all-null start the script's first Write is disabled.
    let o = run(&["replay", "--graph", &fixture("k2.edges"), "--init", "allnull", "--script", &fixture("fig1_script.json")]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.edges");
    std::fs::write(&bad, "0 x\n").unwrap();
    assert_eq!(code(&run(&["run", "--graph", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["modelcheck", "--graph", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&pipe(b"not json\n", &["check-trace", "--in", "-"])), 2);
    assert_eq!(code(&run(&["run", "--graph", "/nonexistent/g.edges"])), 2);
    assert_eq!(code(&run(&["run", "--graph", &fixture("k2.edges"), "--init", "bogus"])), 2);
    assert_eq!(code(&run(&["run", "--graph", &fixture("k2.edges"), "--q", "0"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn budget_exhaustion_exits_1() {
    let o = run(&["run", "--graph", &fixture("k2.edges"), "--init", "allnull", "--budget", "2"]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().last().unwrap().contains("\"outcome\":\"budget\""));
}

#[test]
fn gen_graph_round_trips() {
    let o = run(&["gen-graph", "cycle", "--n", "6"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let g = linkmatch::graph::Graph::from_edge_list(&text).unwrap();
    assert_eq!((g.node_count(), g.edge_count(), g.max_degree()), (6, 6, 2));
}

#[test]
fn sweep_csv_parses() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("tiny.toml");
    std::fs::write(
        &suite,
        "name = \"tiny\"\ninits = 2\ngraphs = [{ kind = \"path\", n = 4 }]\ndaemons = [{ kind = \"sequential\" }, { kind = \"greedy\" }]\n",
    )
    .unwrap();
    let o = run(&["sweep", "--suite", suite.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code(&o), 0);
    let rows = linkmatch::sweep::read_csv(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.stabilized && r.legitimate && r.monitors_pass));
    let o = run(&["sweep", "--suite", suite.to_str().unwrap(), "--summary"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("path(4)"));
}

#[test]
fn summary_mode() {
    let o = run(&["run", "--graph", &fixture("k2.edges"), "--init", "random:5", "--summary"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("moves/(n·Δ³)"));
    assert!(text.contains("Increase"));
}
