//! End-to-end checks of the `promptgate` binary's exit-code contract:
//! 0 success, 1 usage error, 2 corpus parse failure, 3 backend unavailable.

use std::io::Write;
use std::process::Command;

fn promptgate() -> Command {
    Command::new(env!("CARGO_BIN_EXE_promptgate"))
}

#[test]
fn mediate_success_exits_zero_with_json_decision() {
    let output = promptgate()
        .args(["mediate", "a cat sleeping on a windowsill"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0));
    let decision: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("stdout is JSON");
    assert_eq!(decision["verdict"], "pass");
    assert_eq!(decision["output_text"], "a cat sleeping on a windowsill");
}

#[test]
fn unknown_flag_exits_one() {
    let output = promptgate()
        .args(["mediate", "--no-such-flag", "x"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn invalid_tau_exits_one() {
    let output = promptgate()
        .args(["mediate", "--tau", "1.5", "a cat sleeping on a windowsill"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(1));
    assert!(!output.stderr.is_empty());
}

#[test]
fn malformed_corpus_exits_two_in_strict_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.jsonl");
    let mut file = std::fs::File::create(&path).unwrap();
    writeln!(file, "{{\"id\": \"ok-1\", \"prompt\": \"a cat sleeping\"}}").unwrap();
    writeln!(file, "not json at all").unwrap();
    let output = promptgate()
        .args(["eval", "--corpus"])
        .arg(&path)
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "stderr was: {stderr}");
}

#[test]
fn unreachable_remote_backend_exits_three() {
    let output = promptgate()
        .args([
            "mediate",
            "--backend",
            "remote",
            "--endpoint",
            "http://127.0.0.1:9", // discard port: nothing listens here
            "--credential-env",
            "PROMPTGATE_TEST_CREDENTIAL",
            "a cat sleeping on a windowsill",
        ])
        .env("PROMPTGATE_TEST_CREDENTIAL", "test-token")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(3));
}
