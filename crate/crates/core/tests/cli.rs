use std::fs;
use std::process::Command;

fn daqn(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_daqn")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[world]\nmap = \"bundled:four_rooms\"\n[run]\nbudget = \"lots\"\n").unwrap();
    let out = dir.path().join("run");
    let (code, _, err) = daqn(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("config error"));
}

#[test]
fn missing_world_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[world]\nmap = \"nowhere.map\"\n").unwrap();
    let out = dir.path().join("run");
    let (code, _, _) = daqn(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn evaluate_without_a_run_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = daqn(&["evaluate", dir.path().to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn export_plots_needs_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = daqn(&["export-plots", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("DIRS"), "{err}");
}

#[test]
fn train_then_evaluate_inspect_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[world]\nmap = \"bundled:four_rooms\"\nsectors = \"bundled:four_rooms\"\n\n[run]\nbudget = 100_000\neval_period = 50_000\neval_steps = 5_000\ntrace = true\n",
    )
    .unwrap();
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let (code, out, err) = daqn(&["train", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", run_s]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("trained "));
    let (code, out, _) = daqn(&["evaluate", run_s, "--episodes", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("mean reward"));
    let (code, out, _) = daqn(&["inspect-abstraction", run_s]);
    assert_eq!(code, 0);
    assert!(out.contains("states:") && out.contains("options"));
    let (code, out, _) = daqn(&["audit-markov", run_s]);
    assert_eq!(code, 0);
    assert!(out.contains("history dependence"));
    let plots = dir.path().join("plots");
    let (code, _, _) = daqn(&["export-plots", run_s, "--out", plots.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(plots.join("rooms.svg").exists());
}
