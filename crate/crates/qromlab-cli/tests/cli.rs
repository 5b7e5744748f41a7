use std::process::Command;

fn qromlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qromlab"))
}

#[test]
fn swap_lemma_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let csv = dir.path().join("table.csv");
    let status = qromlab()
        .args(["verify-lemma", "swap", "--out"])
        .arg(&json)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 22);
    for key in ["name", "paper_anchor", "lhs", "rhs", "relation", "pass"] {
        assert!(checks[0].get(key).is_some(), "{key}");
    }
    assert!(report.get("runtime_ms").is_none());
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), checks.len() + 1);
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for (i, mode) in ["--sequential", "--eps=1/4"].iter().enumerate() {
        let path = dir.path().join(format!("{i}.json"));
        let status = qromlab()
            .args(["run", "public-coin", "--reps", "1", "--statements", "1,2", mode, "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        outs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn timing_sets_runtime() {
    let out = qromlab().args(["verify-lemma", "swap", "--timing"]).output().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["runtime_ms"].is_u64());
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(!qromlab().args(["verify-lemma", "nope"]).status().unwrap().success());
    assert!(!qromlab().args(["run", "public-coin", "--eps", "3/2"]).status().unwrap().success());
    assert!(!qromlab().args(["run", "public-coin", "--protocol", "nope"]).status().unwrap().success());
}
