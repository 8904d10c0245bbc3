use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn shield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shield"))
        .args(args)
        .env_remove("SHIELD_LLM_API_KEY")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn base_args(out: &str) -> Vec<String> {
    vec![
        "analyze".into(),
        "--input".into(),
        fixture("table1_incidence.csv").display().to_string(),
        "--embeddings".into(),
        fixture("table1_embeddings.csv").display().to_string(),
        "--draws".into(),
        "1000".into(),
        "--out".into(),
        out.into(),
    ]
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn analyze_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let mut args = base_args(out.to_str().unwrap());
    args.extend(
        [
            "--arms",
            "P1 Placebo,P1 Active",
            "--no-viewer",
            "--seed",
            "7",
        ]
        .map(String::from),
    );
    let o = shield(&strs(&args));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let html = fs::read_to_string(out.join("report.html")).unwrap();
    assert!(!html.contains("<script"));
    let meta = fs::read_to_string(out.join("run_meta.json")).unwrap();
    assert!(meta.contains("\"seed\": 7"));
    assert!(meta.contains("\"P1 Placebo\""));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "input = {:?}\nembeddings = {:?}\ndraws = 1000\nseed = 5\nsim_min = 0.4\narms = [\"P1 Active\"]\nout = {:?}\n",
            fixture("table1_incidence.csv"),
            fixture("table1_embeddings.csv"),
            dir.path().join("from_file"),
        ),
    )
    .unwrap();
    let out = dir.path().join("from_flag");
    let o = shield(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = fs::read_to_string(out.join("run_meta.json")).unwrap();
    assert!(meta.contains("\"seed\": 9"));
    assert!(meta.contains("\"sim_min\": 0.4"));
    assert!(!dir.path().join("from_file").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(
        shield(&["analyze", "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(
        shield(&[
            "analyze",
            "--gamma",
            "1.5",
            "--input",
            "a",
            "--embeddings",
            "b"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        shield(&[
            "analyze",
            "--draws",
            "10",
            "--input",
            "a",
            "--embeddings",
            "b"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(shield(&["analyze", "--input", "a"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "unknown_key = 1\n").unwrap();
    assert_eq!(
        shield(&["analyze", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(shield(&["--help"]).status.code(), Some(0));
}

#[test]
fn llm_mode_without_credentials_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = base_args(dir.path().join("o").to_str().unwrap());
    args.extend(
        [
            "--labeler",
            "llm",
            "--llm-endpoint",
            "https://llm.example.invalid/v1/chat/completions",
            "--llm-model",
            "m",
        ]
        .map(String::from),
    );
    let o = shield(&strs(&args));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SHIELD_LLM_API_KEY"));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = shield(&[
        "analyze",
        "--input",
        "/nonexistent/table.csv",
        "--embeddings",
        fixture("table1_embeddings.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let table = dir.path().join("t.csv");
    fs::write(&table, "pt,A|N=5,B|N=5\nNot embedded,1,2\n").unwrap();
    let o = shield(&[
        "analyze",
        "--input",
        table.to_str().unwrap(),
        "--embeddings",
        fixture("table1_embeddings.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Not embedded"));
}

#[test]
fn missing_viewer_assets_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = base_args(dir.path().join("o").to_str().unwrap());
    args.extend(["--viewer-assets", "/nonexistent/viewer.js"].map(String::from));
    assert_eq!(shield(&strs(&args)).status.code(), Some(1));
}
