//! End-to-end checks of the `aads` binary: exit codes, config merging and output files.

use std::path::Path;
use std::process::{Command, Output};

fn aads(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aads")).args(args).current_dir(dir).env_remove("AADS_THREADS").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_diagnostic(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code), "{}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("aads: error code={code} kind={kind} message=")), "{err}");
}

#[test]
fn help_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["fg", "--help"], &["--version"]] {
        let o = aads(args, dir.path());
        assert!(o.status.success(), "{args:?}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_diagnostic(&aads(&["penrose", "--model", "ads", "--d", "4", "--bogus", "1"], dir.path()), 2, "Usage");
    assert_diagnostic(&aads(&["fg", "--model", "ads", "--d", "4"], dir.path()), 2, "Config");
    assert_diagnostic(&aads(&["penrose", "--model", "kerr", "--d", "4"], dir.path()), 2, "Config");
    assert_diagnostic(&aads(&["spacetime", "--model", "ads", "--d", "4", "--point", "0,-1,1,1"], dir.path()), 2, "Domain");
    assert_diagnostic(&aads(&["penrose", "--model", "ads", "--d", "4", "--threads", "0"], dir.path()), 2, "Config");
}

#[test]
fn config_files_are_validated_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "penrose", "model": "ads", "d": 4, "n": 5, "format": "json"}"#).unwrap();
    let from_file = aads(&["penrose", "--config", "run.json"], dir.path());
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    let text = String::from_utf8(from_file.stdout).unwrap();
    assert!(text.trim_start().starts_with('{'));

    let overridden = aads(&["penrose", "--config", "run.json", "--format", "csv"], dir.path());
    assert!(overridden.status.success(), "{}", stderr(&overridden));
    let text = String::from_utf8(overridden.stdout).unwrap();
    assert!(text.starts_with("polyline,tau,angle"), "{text}");

    std::fs::write(&cfg, r#"{"model": "ads", "d": 4, "unknown_key": 1}"#).unwrap();
    assert_diagnostic(&aads(&["penrose", "--config", "run.json"], dir.path()), 2, "Config");
    std::fs::write(&cfg, r#"{"command": "fermat", "model": "ads", "d": 4}"#).unwrap();
    assert_diagnostic(&aads(&["penrose", "--config", "run.json"], dir.path()), 2, "Config");
    std::fs::write(&cfg, r#"{"model": "ads", "d": 4, "order": 3}"#).unwrap();
    assert_diagnostic(&aads(&["penrose", "--config", "run.json"], dir.path()), 2, "Config");
}

#[test]
fn numerical_failures_exit_three_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = aads(
        &["timefunction", "--model", "minkowski", "--d", "3", "--p=-1,0,0", "--q", "1,0,0", "--point", "5,0,0", "--out", "tf.json"],
        dir.path(),
    );
    assert_diagnostic(&o, 3, "OutOfRegion");
    assert!(!dir.path().join("tf.json").exists());
}

#[test]
fn output_files_match_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["timefunction", "--model", "minkowski", "--d", "3", "--p=-1,0,0", "--q", "1,0,0", "--point", "0,0.1,0"];
    let printed = aads(&args, dir.path());
    assert!(printed.status.success(), "{}", stderr(&printed));
    let mut with_out = args.to_vec();
    with_out.extend(["--out", "tf.json"]);
    let written = aads(&with_out, dir.path());
    assert!(written.status.success() && written.stdout.is_empty());
    assert_eq!(std::fs::read(dir.path().join("tf.json")).unwrap(), printed.stdout);
}
