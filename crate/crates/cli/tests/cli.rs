use std::path::Path;
use std::process::{Command, Output};

fn factorvae(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factorvae"))
        .current_dir(root)
        .env("FACTORVAE_OUTPUT_ROOT", root.join("runs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn dry_run_echoes_overrides() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(t.path(), &["train", "--dry-run", "--objective", "factor_vae", "--gamma", "35", "--set", "batch_size=32"]);
    assert!(o.status.success());
    let cfg: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cfg["objective"]["gamma"], 35.0);
    assert_eq!(cfg["batch_size"], 32);
    assert!(!t.path().join("runs").exists());
}

#[test]
fn configuration_errors_exit_2_and_name_the_key() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(t.path(), &["train", "--dry-run", "--set", "objective.gama=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("objective.gama"));

    std::fs::write(t.path().join("c.json"), r#"{"optimiser": {}}"#).unwrap();
    let o = factorvae(t.path(), &["train", "--dry-run", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optimiser"));

    let o = factorvae(t.path(), &["train", "--dry-run", "--set", "batch_size=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_4() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(t.path(), &["evaluate", "--run-dir", "nowhere"]);
    assert_eq!(o.status.code(), Some(4));
    let o = factorvae(t.path(), &["metric", "--fixture", "oracle", "--dataset", "npz:missing.npz"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn zero_iterations_writes_the_initial_checkpoint_only() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(t.path(), &["train", "--iterations", "0", "--run-dir", "r"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpts: Vec<_> = std::fs::read_dir(t.path().join("r/checkpoints")).unwrap().collect();
    assert_eq!(ckpts.len(), 1);
    assert!(t.path().join("r/checkpoints/checkpoint-00000000.zip").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(t.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dataset"]["source"], "mini-shapes");
    assert_eq!(manifest["dataset"]["size"], 576);
    assert_eq!(manifest["config"]["iterations"], 0);
}

#[test]
fn train_resume_and_inspect() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(
        t.path(),
        &["train", "--objective", "factor_vae", "--gamma", "10", "--iterations", "4", "--set", "log_every=2"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = std::path::PathBuf::from(stdout(&o));
    assert!(run.starts_with(t.path().join("runs")));

    let o = factorvae(t.path(), &["resume", "--run-dir", run.to_str().unwrap(), "--iterations", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(run.join("runlog.csv")).unwrap();
    let iterations: Vec<&str> = log.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iterations, ["0", "2", "4", "6"]);

    for args in [
        vec!["evaluate", "--particles", "4", "--iwae-points", "4"],
        vec!["traverse", "--steps", "3"],
        vec!["sample", "--count", "4"],
        vec!["metric", "--which", "new"],
    ] {
        let mut full = args.clone();
        full.extend(["--run-dir", run.to_str().unwrap()]);
        let o = factorvae(t.path(), &full);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["evaluation.json", "histograms.csv", "traversal.png", "traversal.json", "samples.png", "metric_new.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let o = factorvae(t.path(), &["traverse", "--run-dir", run.to_str().unwrap(), "--rows", "9999"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fixtures_separate_the_metrics() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(t.path(), &["metric", "--fixture", "partial"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scores: Vec<(String, f64)> = stdout(&o)
        .lines()
        .map(|l| {
            let (n, s) = l.split_once(' ').unwrap();
            (n.to_string(), s.parse().unwrap())
        })
        .collect();
    assert_eq!(scores[0].0, "new");
    assert!(scores[0].1 < 0.9);
    assert_eq!(scores[1], ("higgins".to_string(), 1.0));
}

#[test]
fn export_round_trips_through_npz() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(t.path(), &["export", "--out", "m.npz"]);
    assert!(o.status.success());
    let o = factorvae(t.path(), &["metric", "--fixture", "oracle", "--dataset", "npz:m.npz", "--which", "new"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "new 1");
}

#[test]
fn sweep_writes_a_row_per_cell() {
    let t = tempfile::tempdir().unwrap();
    let o = factorvae(
        t.path(),
        &[
            "sweep", "--objective", "beta_vae", "--grid", "1,4", "--seeds", "2", "--iterations", "2", "--workers", "2",
            "--set", "log_every=2", "--sweep-dir", "s",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(t.path().join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(t.path().join("s/sweep.png").exists());
    assert!(t.path().join("s/beta_vae-4-s1/runlog.csv").exists());
}
