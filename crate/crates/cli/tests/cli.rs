use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn miniver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miniver"))
        .args(args)
        .current_dir(corpus_dir())
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn default_mode_is_sound() {
    let out = miniver(&["verify", "gobra_exploit.moo"]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("gobra_exploit.moo [sound]"), "{text}");
    assert!(text.contains("missing_decreases"), "{text}");
}

#[test]
fn json_output_is_a_report() {
    let out = miniver(&["verify", "fact.moo", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mode"], "sound");
    assert_eq!(v["summary"]["rejected"], 0);
}

#[test]
fn negative_arguments_are_values() {
    let out = miniver(&["run", "straightline.moo", "--entry", "abs", "--arg", "-7"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("returned 7\n"));
}

#[test]
fn requires_violation_exits_one() {
    let out = miniver(&[
        "run",
        "fact.moo",
        "--entry",
        "fact",
        "--arg",
        "-1",
        "--check-contracts",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("requires n >= 0 violated"));
}

#[test]
fn bad_usage_is_rejected_by_the_parser() {
    assert_eq!(
        code(&miniver(&["verify", "fact.moo", "--mode", "lenient"])),
        2
    );
    assert_eq!(
        code(&miniver(&[
            "run", "fact.moo", "--entry", "fact", "--fuel", "0"
        ])),
        2
    );
    assert_eq!(code(&miniver(&["frobnicate"])), 2);
}

#[test]
fn runtime_errors_go_to_stderr() {
    let out = miniver(&["run", "fact.moo", "--entry", "nope"]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn graph_and_matrix_subcommands() {
    let dot = miniver(&["graph", "omega_exploit.moo", "--overapprox", "--dot"]);
    assert_eq!(code(&dot), 0);
    assert!(String::from_utf8(dot.stdout)
        .unwrap()
        .contains("style=dashed"));
    let m = miniver(&["matrix", ".", "--manifest", "expected.json"]);
    assert_eq!(code(&m), 0);
    assert_eq!(
        code(&miniver(&["matrix", ".", "--manifest", "missing.json"])),
        2
    );
}
