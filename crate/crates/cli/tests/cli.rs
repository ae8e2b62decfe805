use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn backcom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backcom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn writes_per_trial_and_aggregate_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"M": 2, "N": 2, "K": 2}"#);
    let out = dir.path().join("run.csv");
    let status = backcom(&[
        "--config",
        &cfg,
        "--trials",
        "2",
        "--algorithm",
        "all",
        "--out",
        out.to_str().unwrap(),
        "--trace",
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert_eq!(csv_rows(&out).len(), 12);
    assert_eq!(csv_rows(&dir.path().join("run.agg.csv")).len(), 6);
    assert!(!csv_rows(&dir.path().join("run.trace.csv")).is_empty());
}

#[test]
fn stdout_csv_without_out() {
    let out = backcom(&["--trials", "1", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("trial,algorithm,feasible,objective,jain_fi,antenna,iterations,q_1,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn sweeps_write_one_file_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let status = backcom(&[
        "--trials",
        "2",
        "--sweep",
        "p_max=0.5,1",
        "--sweep",
        "N=2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    for i in 0..4 {
        assert_eq!(
            csv_rows(&dir.path().join(format!("sweep.sweep{i}.csv"))).len(),
            2
        );
    }
    let agg = csv::Reader::from_path(dir.path().join("sweep.agg.csv"))
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    assert_eq!(&agg[0], "p_max");
    assert_eq!(&agg[1], "N");
    assert_eq!(csv_rows(&dir.path().join("sweep.agg.csv")).len(), 4);
}

#[test]
fn dumps_channels() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("channels.csv");
    let status = backcom(&["--trials", "1", "--dump-channels", dump.to_str().unwrap()]);
    assert!(status.status.success());
    // 4×4 forward, 4 direct vectors of 4, 4 backscatter vectors of 4.
    assert_eq!(csv_rows(&dump).len(), 16 + 16 + 16);
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"p_max": -1}"#);
    let out = backcom(&["--config", &cfg, "--trials", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_max must be positive"));

    let cfg = write_config(dir.path(), r#"{"bogus": 1}"#);
    assert!(!backcom(&["--config", &cfg]).status.success());
    assert!(!backcom(&["--algorithm", "noma"]).status.success());
}

#[test]
fn all_infeasible_exits_nonzero() {
    let out = backcom(&["--trials", "2", "--sweep", "p_max=1e-6"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}
