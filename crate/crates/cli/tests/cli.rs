use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bif(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bif"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("cfg.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"data":{"source":"syn","id":"syn1","n":100,"seed":1},"bif":{"learning_rat":0.1}}"#,
    );
    let out = bif(&["train"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("bif") && msg.contains("learning_rat"), "{msg}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn invalid_value_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"data":{"source":"syn","id":"syn1","n":100,"seed":1},"classifier":{"train":{"epochs":0}}}"#,
    );
    let out = bif(&["train"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr_json(&out)["message"].as_str().unwrap().to_string();
    assert!(msg.contains("classifier.train"), "{msg}");
}

#[test]
fn explain_without_model_is_a_run_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"data":{"source":"syn","id":"syn1","n":100,"seed":1}}"#,
    );
    let out = bif(&["explain"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "run");
}

#[test]
fn gen_writes_full_table_and_refuses_rerun_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("o");
    let cfg = repo_config("syn1_global.json");
    let out = bif(&["gen"], &cfg, &out_dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(out_dir.join("syn1.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 10_001);
    assert!(lines.iter().all(|l| l.split(',').count() == 11));
    assert!(out_dir.join("syn1_truth.csv").exists());

    let again = bif(&["gen"], &cfg, &out_dir);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr_json(&again)["message"]
        .as_str()
        .unwrap()
        .contains("--force"));

    let forced = bif(&["gen", "--force"], &cfg, &out_dir);
    assert!(forced.status.success());
    assert_eq!(fs::read_to_string(out_dir.join("syn1.csv")).unwrap(), table);
}

#[test]
fn syn1_global_pipeline_recovers_relevant_features() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("o");
    let cfg = repo_config("syn1_global.json");
    for cmd in ["train", "explain", "eval"] {
        let out = bif(&[cmd], &cfg, &out_dir);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out_dir.join(format!("manifest_{cmd}.json")).exists());
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("eval_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["mcc"].as_f64(), Some(1.0));
    assert_eq!(report["n_test"].as_u64(), Some(2000));
    let svg = fs::read_to_string(out_dir.join("importance.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn seed_flag_changes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"data":{"source":"syn","id":"syn2","n":50,"seed":1}}"#,
    );
    let read = |seed: &str, dir: &str| {
        let d = tmp.path().join(dir);
        let out = bif(&["gen", "--seed", seed], &cfg, &d);
        assert!(out.status.success());
        fs::read_to_string(d.join("syn2.csv")).unwrap()
    };
    assert_eq!(read("3", "a"), read("3", "b"));
    assert_ne!(read("3", "c"), read("4", "d"));
}
