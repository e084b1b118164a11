use std::process::Command;

fn gazekit(dir: &std::path::Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gazekit")).current_dir(dir).args(args).output().unwrap()
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"n_subjects": 0}"#).unwrap();
    std::fs::write(dir.path().join("broken.json"), "{").unwrap();
    for args in [
        vec!["simulate", "--config", "bad.json", "--out", "d"],
        vec!["simulate", "--config", "broken.json", "--out", "d"],
        vec!["simulate", "--config", "missing.json", "--out", "d"],
        vec!["train", "--data", "d", "--model", "transformer"],
        vec!["train", "--data", "d", "--lr", "-1"],
        vec!["attention", "--out", "a", "--noise-deg", "-2"],
        vec!["--threads", "0", "report", "--inputs", "x.json"],
        vec!["frobnicate"],
    ] {
        assert_eq!(gazekit(dir.path(), &args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [vec!["train", "--data", "nowhere"], vec!["eval", "--checkpoint", "none.json", "--data", "x", "--report", "r.csv"]] {
        assert_eq!(gazekit(dir.path(), &args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn simulate_then_train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let ok = |args: &[&str]| {
        let out = gazekit(dir.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["--seed", "3", "simulate", "--out", "d", "--sessions", "2"]);
    ok(&["train", "--data", "d", "--epochs", "1", "--out", "m.json"]);
    ok(&["eval", "--checkpoint", "m.json", "--data", "d", "--report", "r.csv", "--plots", "p"]);
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("metric,value\n"));
    assert!(csv.lines().all(|l| !l.contains(';')));
    let curve = std::fs::read_to_string(dir.path().join("p/yaw_curve.csv")).unwrap();
    assert!(curve.starts_with("bin_center_deg,"));
    assert!(dir.path().join("p/pred_distribution.svg").exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["model"], "static");
}
