use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reshape-ot"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

#[test]
fn run_subcommand_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"experiment":"moons_transport","methods":[{{"kind":"classical_exact"}}],"rotations":[20],"trials":2,"output_dir":{:?}}}"#,
            out_dir
        ),
    );
    let out = bin().args(["run", "--config"]).arg(&cfg).args(["--override", "trials=3"]).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "summary.csv", "manifest.json", "table_transport_error.csv"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    // 3 trials plus one aggregate row after the header.
    assert_eq!(results.lines().count(), 5);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["trials"], 3);
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1, 2]));
    assert!(manifest["version"].as_str().unwrap().starts_with('v'));
    assert!(manifest["tunables"]["sinkhorn_default_marginal_tol"].is_number());
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment":"moons_transport","methods":[{"kind":"classical_exact"}],"output_dir":"x","colour":1}"#,
    );
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let cfg = write_config(dir.path(), r#"{"experiment":"moons_transport","methods":[{"kind":"classical_exact"}],"output_dir":"x"}"#);
    let out = bin().args(["run", "--config"]).arg(&cfg).args(["--override", "trials=0"]).output().unwrap();
    assert_eq!(code(&out), 2);
    let out = bin().args(["run", "--config"]).arg(&cfg).args(["--override", "methods.0.alpha=1"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_files_exit_with_their_category() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "--config"]).arg(dir.path().join("absent.json")).output().unwrap();
    assert_eq!(code(&out), 2);
    let out = bin()
        .args(["geo", "--method", "classical", "--data"])
        .arg(dir.path().join("absent.csv"))
        .arg("--out")
        .arg(dir.path().join("geo"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn moons_subcommand_runs_requested_method() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("m");
    let out = bin()
        .args(["moons", "--rotation", "30,60", "--method", "sinkhorn", "--epsilon", "0.05", "--trials", "2", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).filter(|l| l.contains("transport_error")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|l| l.starts_with("moons_transport,sinkhorn,none,,,0.05,")));
}

#[test]
fn help_lists_config_keys() {
    let out = bin().args(["run", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("n_displacements") && text.contains("base_seed"));
    let out = bin().arg("--version").output().unwrap();
    assert_eq!(code(&out), 0);
}
