use std::path::Path;
use std::process::{Command, Output};

fn mffqi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mffqi")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn collect_then_train_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&mffqi(&["collect", "--out", "batch.bin", "--set", "batch_size=50"], d));
    assert!(d.join("batch.bin.manifest.json").exists());
    for m in ["m1.json", "m2.json"] {
        ok(&mffqi(&["train", "--batch", "batch.bin", "--model-out", m, "--set", "fqi.kappa=15"], d));
    }
    let m1 = std::fs::read(d.join("m1.json")).unwrap();
    assert_eq!(m1, std::fs::read(d.join("m2.json")).unwrap());

    ok(&mffqi(&["evaluate", "--model", "m1.json", "--batch", "batch.bin", "--out", "eval.csv"], d));
    let eval = std::fs::read_to_string(d.join("eval.csv")).unwrap();
    assert!(eval.starts_with("experiment,seed,n_agents,batch_size,kappa,lambda,metric,value,wall_clock_s\n"));
    assert!(eval.contains(",sup_err,"));
    assert!(eval.contains(",bellman_residual,"));
}

#[test]
fn oracle_compare_reports_sup_err() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = mffqi(
        &["oracle-compare", "--out", "r.csv", "--oracle-out", "q.csv", "--set", "batch_size=60", "--set", "fqi.kappa=30"],
        d,
    );
    ok(&out);
    let line = String::from_utf8(out.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert!(report["sup_err"].is_f64());
    assert!(report["argmax_agreement"].is_f64());
    let q = std::fs::read_to_string(d.join("q.csv")).unwrap();
    assert!(q.starts_with("histogram,action,q_star\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.csv.manifest.json")).unwrap()).unwrap();
    assert!(manifest["git_describe"].is_string());
    assert_eq!(manifest["seeds"], serde_json::json!([2024]));
    assert_eq!(manifest["config"]["experiment"], "oracle_compare");
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mffqi(&["train", "--config", "does-not-exist.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mffqi(&["sweep-agents", "--set", "seeds=[1,1]"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = mffqi(&["train", "--set", "fqi.lambda=-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_compare_on_drift_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = mffqi::harness::config::ExperimentConfig {
        env: mffqi::harness::reference::reference_drift(),
        ..mffqi::harness::config::ExperimentConfig::reference(mffqi::harness::config::ExperimentKind::OracleCompare)
    };
    std::fs::write(d.join("c.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = mffqi(&["oracle-compare", "--config", "c.json"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_round_trips_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = mffqi::harness::config::ExperimentConfig::reference(mffqi::harness::config::ExperimentKind::Convergence);
    std::fs::write(d.join("c.json"), serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let small = ["--set", "batch_size=30", "--set", "grids.kappas=[0,1,2,3]", "--set", "plateau_kappa=10"];
    let mut args = vec!["convergence", "--config", "c.json", "--out", "a.csv"];
    args.extend(small);
    ok(&mffqi(&args, d));
    ok(&mffqi(&["convergence", "--config", "a.csv.manifest.json", "--out", "b.csv"], d));
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
}
