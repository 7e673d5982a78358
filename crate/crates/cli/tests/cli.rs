use std::fs;
use std::path::Path;
use std::process::Command;

fn harvest() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harvest"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"scenario": {"trellis_length": 0.8}}"#);
    let out = dir.path().join("out");
    let status = harvest()
        .args(["run", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("Success rate"));
    for f in ["events.jsonl", "picks.csv", "metrics.csv", "summary.txt", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let used: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(used["seed"], 4);
}

#[test]
fn montecarlo_writes_per_run_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"scenario": {"trellis_length": 0.6}}"#);
    let out = dir.path().join("mc");
    let status = harvest()
        .args(["montecarlo", "--config", cfg.to_str().unwrap(), "--runs", "2", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"roi_overlap": 2.0}"#);
    let out = dir.path().join("out");
    let status = harvest()
        .args(["run", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());

    let missing = harvest()
        .args(["run", "--config", "/nonexistent/cfg.json", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(2));

    let zero = harvest()
        .args(["montecarlo", "--runs", "0", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(zero.code(), Some(2));
}

#[test]
fn evaldet_scores_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let header = "frame_id,u_min,v_min,u_max,v_max,label\n";
    let truth = dir.path().join("truth.csv");
    let pred = dir.path().join("pred.csv");
    fs::write(&truth, format!("{header}0,10,10,30,30,plum\n0,100,100,120,120,plum\n1,50,50,70,70,plum\n")).unwrap();
    fs::write(&pred, format!("{header}0,11,11,30,30,plum\n0,200,200,210,210,plum\n1,50,50,70,70,plum\n")).unwrap();
    let out = harvest()
        .args(["evaldet", "--pred", pred.to_str().unwrap(), "--truth", truth.to_str().unwrap(), "--name", "hsv"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("detector,true_positives"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..5], ["hsv", "2", "1", "1", "0"]);

    let bad = harvest()
        .args(["evaldet", "--pred", "/nonexistent.csv", "--truth", truth.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(2));
}
