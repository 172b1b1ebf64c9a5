use std::path::Path;
use std::process::{Command, Output};

fn oinfo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oinfo"))
        .args(args)
        .current_dir(dir)
        .env_remove("OINFO_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn oracle_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = oinfo(&["oracle", "--kind", "redundant", "--n-vars", "3", "--sigma", "1"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let o = v["measures"]["o_info"].as_f64().unwrap();
    assert!((o - 0.0849).abs() < 1e-3, "{o}");
    assert_eq!(v["gradients"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_checkpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = oinfo(
        &["estimate", "--kind", "redundant", "--checkpoint", "nope.ckpt", "--n-test", "10"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("nope.ckpt"));
}

#[test]
fn estimate_needs_a_score_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = oinfo(&["estimate", "--kind", "redundant"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--exact-scores"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nlearning_rat = 0.1\n").unwrap();
    let out = oinfo(&["sweep", "-c", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("learning_rat"), "{}", stderr(&out));
}

#[test]
fn singular_system_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = oinfo(&["oracle", "--kind", "synergistic", "--n-vars", "4", "--sigma", "0"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn exact_scores_refuse_transformed_systems() {
    let dir = tempfile::tempdir().unwrap();
    let out = oinfo(
        &["estimate", "--kind", "redundant", "--transform", "cdf", "--exact-scores", "--n-test", "100"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_oinfo"))
        .args(["estimate", "--kind", "redundant", "--exact-scores", "--n-test", "200", "--mc-steps", "2", "--seeds", "0"])
        .current_dir(dir.path())
        .env("OINFO_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("from-env/report.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["source_kind"], "exact");
    assert_eq!(report["meta"]["n_samples"], 200);
}

#[test]
fn gen_then_train_from_dataset_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = oinfo(
        &["gen", "--kind", "synergistic", "--n-vars", "3", "--sigma", "0.5", "--n-samples", "400", "--out", "d/syn.json", "--format", "csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    std::fs::write(
        dir.path().join("run.toml"),
        "output_dir = \"run\"\n[dataset]\npath = \"d/syn.json\"\n[train]\nn_iterations = 20\nbatch_size = 16\n",
    )
    .unwrap();
    let out = oinfo(&["train", "-c", "run.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("run/model.ckpt").exists());
    let log = std::fs::read_to_string(dir.path().join("run/training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 21);

    let out = oinfo(
        &["grad", "-c", "run.toml", "--checkpoint", "run/model.ckpt", "--mc-steps", "2", "--seeds", "0"],
        dir.path(),
    );
    // the default model has no gradient tasks
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
