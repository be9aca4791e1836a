//! End-to-end checks of the command-line interface: exit codes, config
//! errors, and byte-identical structured reports across reruns.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clusterkit"))
}

fn write_model(dir: &std::path::Path, j0: f64, j1: f64, lambda: f64) -> std::path::PathBuf {
    let path = dir.join("model.json");
    let text = format!(
        "{{\"dimension\": 1, \"lambda\": {lambda}, \"coupling\": [\
         {{\"offset\": [0], \"re\": {j0}, \"im\": 0.0}},\
         {{\"offset\": [1], \"re\": {j1}, \"im\": 0.0}},\
         {{\"offset\": [-1], \"re\": {j1}, \"im\": 0.0}}]}}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn verify_suite_reports_are_byte_identical() {
    let run = || {
        bin()
            .args([
                "verify",
                "combinatorics",
                "--seed",
                "7",
                "--format",
                "structured",
            ])
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout, "reports differ between reruns");
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("\"schema_version\": 1"));
    assert!(text.contains("\"suite\": \"combinatorics\""));
    assert!(!text.contains("FAIL"));
}

#[test]
fn bounds_command_is_informational() {
    let dir = std::env::temp_dir().join("clusterkit-cli-bounds");
    std::fs::create_dir_all(&dir).unwrap();
    let model = write_model(&dir, 2.0, 0.5, 1.0); // not in any certified regime
    let out = bin()
        .args(["bounds", "large-mass", "--model"])
        .arg(&model)
        .args(["--n", "4"])
        .output()
        .unwrap();
    // NOT_CERTIFIED rows never fail the run
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("NOT_CERTIFIED"));
}

#[test]
fn odd_n_is_a_usage_error() {
    let dir = std::env::temp_dir().join("clusterkit-cli-oddn");
    std::fs::create_dir_all(&dir).unwrap();
    let model = write_model(&dir, 10000.0, 0.5, 1.0);
    let out = bin()
        .args(["bounds", "large-mass", "--model"])
        .arg(&model)
        .args(["--n", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("INVALID_N"));
}

#[test]
fn invalid_model_is_a_config_error() {
    let dir = std::env::temp_dir().join("clusterkit-cli-invalid");
    std::fs::create_dir_all(&dir).unwrap();
    // J_≠ >= J(0)
    let model = write_model(&dir, 1.0, 0.6, 1.0);
    let out = bin()
        .args(["verify", "polymer", "--model"])
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("J_NEQ_NOT_LESS"));
}

#[test]
fn oracle_command_passes_on_certified_point() {
    let dir = std::env::temp_dir().join("clusterkit-cli-oracle");
    std::fs::create_dir_all(&dir).unwrap();
    let model = write_model(&dir, 10000.0, 0.5, 1.0);
    let out = bin()
        .args(["oracle", "--model"])
        .arg(&model)
        .args([
            "--n",
            "2",
            "--sites",
            "2",
            "--samples",
            "50000",
            "--format",
            "structured",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bound-large-mass-n2"));
    assert!(!text.contains("\"status\": \"FAIL\""));
}

#[test]
fn unknown_suite_is_rejected() {
    let out = bin().args(["verify", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
