use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsynth"))
        .args(args)
        .env_remove("LLM_API_KEY")
        .env_remove("LLM_BASE_URL")
        .env_remove("LLM_MODEL")
        .output()
        .expect("spawn qsynth")
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = qsynth(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eval_prints_q() {
    let out = ok(&["eval", "--circuit", &fixture("disconnected_a.txt")]);
    assert!(out.starts_with("q = 0.8000\n"), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("purity[")).count(), 25);
    assert!(out.contains("purity[9] = 1.000000"));
    assert!(out.contains("purity[0] = 0.500000"));
}

#[test]
fn eval_dense_matches() {
    let out = ok(&["eval", "--dense", "--circuit", &fixture("bell_ghz3.txt")]);
    assert!(out.starts_with("q = 1.0000\n"), "{out}");
}

#[test]
fn analyze_summary() {
    let out = ok(&["analyze", "--circuit", &fixture("bell_ghz3.txt")]);
    assert_eq!(out.lines().next(), Some("11 × BELL, 1 × GHZ_3"));
    assert!(out.contains("[11, 23, 24]: GHZ_3"));
    let json = ok(&[
        "analyze",
        "--json",
        "--circuit",
        &fixture("disconnected_a.txt"),
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["components"].as_array().unwrap().len(), 9);
}

#[test]
fn synth_hillclimb_budget() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    ok(&[
        "synth",
        "--qubits",
        "25",
        "--gates",
        "25",
        "--queries",
        "3",
        "--steps",
        "15",
        "--proposer",
        "hillclimb",
        "--seed",
        "11",
        "--out",
        path_str(&run),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&run).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["experiment"]["evaluations"], 45);
    assert_eq!(v["experiment"]["queries"].as_array().unwrap().len(), 3);

    let verified = ok(&["replay-verify", path_str(&run)]);
    assert!(verified.starts_with("ok: "), "{verified}");
    let table = ok(&["table", path_str(&run)]);
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with("run | initial | query 1 | query 2 | query 3\n"));
}

#[test]
fn synth_into_directory_uses_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--qubits",
        "6",
        "--gates",
        "6",
        "--queries",
        "1",
        "--steps",
        "3",
        "--proposer",
        "hillclimb",
        "--out",
        path_str(dir.path()),
    ]);
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 1);
    assert!(
        names[0].starts_with("run-") && names[0].ends_with(".json"),
        "{names:?}"
    );
}

#[test]
fn synth_replay_script() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("init.txt");
    std::fs::write(&init, "[('H', [0]), ('H', [1]), ('H', [2])]").unwrap();
    let script = dir.path().join("script.txt");
    std::fs::write(
        &script,
        "[('H', [0]), ('CNOT', [0, 1]), ('H', [2])]\n---\nnot a circuit\n---\n```\n[('H', [0]), ('CNOT', [0, 1]), ('CNOT', [1, 2])]\n```\n",
    )
    .unwrap();
    let run = dir.path().join("run.json");
    let out = ok(&[
        "synth",
        "--qubits",
        "3",
        "--gates",
        "3",
        "--queries",
        "2",
        "--steps",
        "3",
        "--proposer",
        "replay",
        "--feedback",
        "--script",
        path_str(&script),
        "--init",
        path_str(&init),
        "--out",
        path_str(&run),
    ]);
    assert!(
        out.contains("best q = 1.0000 after 2 evaluations (done)"),
        "{out}"
    );
    let table = ok(&["table", path_str(&run)]);
    let row = table.lines().nth(1).unwrap();
    assert!(row.ends_with("| 0 | 0→1 | done"), "{row}");
}

#[test]
fn tampered_run_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    ok(&[
        "synth",
        "--qubits",
        "8",
        "--gates",
        "10",
        "--queries",
        "1",
        "--steps",
        "4",
        "--proposer",
        "hillclimb",
        "--out",
        path_str(&run),
    ]);
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&run).unwrap()).unwrap();
    let q = v["experiment"]["initial_q"].as_f64().unwrap();
    v["experiment"]["initial_q"] = (q + 0.01).into();
    std::fs::write(&run, v.to_string()).unwrap();
    let o = qsynth(&["replay-verify", path_str(&run)]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("mismatch: initial"), "{}", stdout(&o));
    assert!(stderr(&o).contains("do not reproduce"));

    v["schema_version"] = 2.into();
    std::fs::write(&run, v.to_string()).unwrap();
    let o = qsynth(&["table", path_str(&run)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("schema version 2"), "{}", stderr(&o));
}

#[test]
fn random_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.txt");
    ok(&[
        "random",
        "--qubits",
        "7",
        "--gates",
        "12",
        "--seed",
        "5",
        "--out",
        path_str(&c),
    ]);
    let again = dir.path().join("d.txt");
    ok(&[
        "random",
        "--qubits",
        "7",
        "--gates",
        "12",
        "--seed",
        "5",
        "--out",
        path_str(&again),
    ]);
    assert_eq!(std::fs::read(&c).unwrap(), std::fs::read(&again).unwrap());
    let out = ok(&["eval", "--qubits", "7", "--circuit", path_str(&c)]);
    assert!(out.contains("qubits = 7, gates = 12"), "{out}");
}

#[test]
fn baseline_rows() {
    let out = ok(&[
        "baseline", "--qubits", "12", "--gates", "14", "--budget", "20", "--runs", "3", "--seed",
        "2",
    ]);
    let rows: Vec<&str> = out
        .lines()
        .filter(|l| l.contains("| hillclimb |"))
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ends_with("| 20")));
    assert!(out.contains("max best q over 3 runs"));
}

#[test]
fn errors_exit_nonzero() {
    let o = qsynth(&["eval", "--circuit", "/definitely/missing.txt"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: reading"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "[('TOFFOLI', [0, 1, 2])]").unwrap();
    let o = qsynth(&["analyze", "--circuit", path_str(&bad)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown-gate"), "{}", stderr(&o));

    std::fs::write(&bad, "[('CNOT', [3, 3])]").unwrap();
    let o = qsynth(&["eval", "--circuit", path_str(&bad)]);
    assert!(
        stderr(&o).contains("control equals target"),
        "{}",
        stderr(&o)
    );

    let o = qsynth(&[
        "synth",
        "--qubits",
        "4",
        "--gates",
        "4",
        "--proposer",
        "replay",
        "--out",
        "x.json",
    ]);
    assert!(!o.status.success());
    assert!(qsynth(&["table"]).status.code() != Some(0));
}

#[test]
fn unreachable_llm_records_failed_steps() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let base = format!("http://{addr}/v1");
    let o = Command::new(env!("CARGO_BIN_EXE_qsynth"))
        .args([
            "synth",
            "--qubits",
            "4",
            "--gates",
            "4",
            "--queries",
            "1",
            "--steps",
            "1",
            "--proposer",
            "llm",
            "--timeout",
            "2",
            "--out",
            path_str(&run),
        ])
        .env("LLM_BASE_URL", &base)
        .env("LLM_MODEL", "none")
        .env_remove("LLM_API_KEY")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&run).unwrap()).unwrap();
    let step = &v["experiment"]["queries"][0]["steps"][0];
    assert_eq!(step["rejected_reason"], "proposer");
    assert_eq!(v["experiment"]["evaluations"], 0);
    assert_eq!(
        v["experiment"]["config"]["proposer"]["base_url"],
        base.as_str()
    );
}
