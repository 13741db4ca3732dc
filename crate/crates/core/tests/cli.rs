//! The `ebbflow` binary: subcommands and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ebbflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebbflow")).args(args).env_remove("EBBFLOW_LOG").output().unwrap()
}

fn scenario(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "n = 4\ndelta = 1\nkappa = 3\nhorizon = 10\nseed = 3\n";

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn run_writes_a_trace_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), SMALL);
    let trace = dir.path().join("trace.jsonl");
    let out = ebbflow(&["run", file.to_str().unwrap(), "--out", trace.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    assert!(stdout.contains("safety"));
    let check = ebbflow(&["check", trace.to_str().unwrap()]);
    assert_eq!(code(&check), 0);
}

#[test]
fn shipped_example_scenarios_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = ebbflow(&["run", path.to_str().unwrap()]);
            assert_eq!(code(&out), 0, "{}: {}", path.display(), String::from_utf8_lossy(&out.stdout));
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = scenario(dir.path(), "n = 4\ndelta = 1\nkappa = 1\nhorizon = 10\n");
    let out = ebbflow(&["run", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));

    assert_eq!(code(&ebbflow(&["run", dir.path().join("missing.toml").to_str().unwrap()])), 2);

    let good = scenario(dir.path(), SMALL);
    assert_eq!(code(&ebbflow(&["run", good.to_str().unwrap(), "--check", "safety,bogus"])), 2);
    assert_eq!(code(&ebbflow(&["attack", "nonsense", "--n", "7", "--colluders", "2"])), 2);
    assert_eq!(code(&ebbflow(&["attack", "equivocation", "--n", "7", "--colluders", "8"])), 2);
}

#[test]
fn selected_checkers_only() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), SMALL);
    let out = ebbflow(&["run", file.to_str().unwrap(), "--check", "safety,liveness"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 2, "{stdout}");
}

#[test]
fn tampered_trace_fails_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), SMALL);
    let trace = dir.path().join("trace.jsonl");
    assert_eq!(code(&ebbflow(&["run", file.to_str().unwrap(), "--out", trace.to_str().unwrap()])), 0);

    // rewind the last snapshot to genesis, the parent of the slot-0 block
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let genesis = lines
        .iter()
        .find_map(|r| (r["type"] == "block" && r["block"]["slot"] == 0).then(|| r["block"]["parent"].clone()))
        .unwrap();
    let snap = lines.iter_mut().rev().find(|r| r["type"] == "snapshot").unwrap();
    snap["state"]["chain_ava"] = genesis.clone();
    snap["state"]["chain_fin"] = genesis;
    let body: Vec<String> = lines.iter().map(|v| v.to_string()).collect();
    fs::write(&trace, body.join("\n") + "\n").unwrap();

    let out = ebbflow(&["check", trace.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    fs::write(&trace, "not json\n").unwrap();
    assert_eq!(code(&ebbflow(&["check", trace.to_str().unwrap()])), 2);
}

#[test]
fn attacks_report_attribution() {
    let out = ebbflow(&["attack", "double-finalization", "--n", "9", "--colluders", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("implicated: v0 v1 v2"), "{stdout}");
    assert!(stdout.contains("XFAIL"));

    let out = ebbflow(&["attack", "silent", "--n", "7", "--colluders", "2"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("no conflicting finalization"));
}

#[test]
fn seed_changes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), &format!("{SMALL}proposers = \"random\"\n"));
    let f = file.to_str().unwrap();
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        assert_eq!(code(&ebbflow(&["run", f, "--seed", seed, "--out", path.to_str().unwrap()])), 0);
        fs::read(path).unwrap()
    };
    let a = run("1", "a.jsonl");
    let b = run("2", "b.jsonl");
    let again = run("1", "c.jsonl");
    assert_ne!(a, b);
    assert_eq!(a, again);
}

#[test]
fn log_level_only_changes_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario(dir.path(), SMALL);
    let quiet = ebbflow(&["run", file.to_str().unwrap()]);
    let loud = Command::new(env!("CARGO_BIN_EXE_ebbflow"))
        .args(["run", file.to_str().unwrap()])
        .env("EBBFLOW_LOG", "debug")
        .output()
        .unwrap();
    assert_eq!(quiet.stdout, loud.stdout);
    assert_eq!(quiet.status.code(), loud.status.code());
}
