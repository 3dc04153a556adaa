//! The command-line contract: commands, exit codes, and output channels.
//!
//! Exit codes are part of the interface: 0 for success or a conforming
//! report, 1 for constraint violations, 2 for parse or lowering problems,
//! 3 for runtime errors.

use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn tmkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmkit"))
        .args(args)
        .env("TMKIT_COLOR", "0")
        .output()
        .expect("tmkit binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn check_passes_every_corpus_model() {
    for model in ["flight.tm", "order.tm", "cart.tm", "edp.tm"] {
        let out = tmkit(&["check", &corpus(model)]);
        assert_eq!(out.status.code(), Some(0), "{model}: {}", stderr(&out));
        assert!(stdout(&out).starts_with("ok: "), "{model} summary: {}", stdout(&out));
    }
}

#[test]
fn check_missing_file_exits_2() {
    let out = tmkit(&["check", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent"));
    assert!(stdout(&out).is_empty());
}

#[test]
fn check_reports_an_illegal_flow_with_its_position() {
    let dir = std::env::temp_dir().join("tmkit-cli-badflow");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.tm");
    // receive -> create is not a lawful stage order in either notation.
    std::fs::write(
        &path,
        "thimac A {\n  storage;\n  stage receive r1;\n  stage create c1;\n}\nflow r1 -> c1;\n",
    )
    .unwrap();
    let out = tmkit(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("FlowOrderViolation"), "diagnostic code missing: {err}");
    assert!(err.contains("6:1"), "position missing: {err}");
}

#[test]
fn check_rejects_malformed_json_with_its_path() {
    let dir = std::env::temp_dir().join("tmkit-cli-badjson");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\"format\": \"tmkit/1\", \"bundle\": {\"model\": 7}}").unwrap();
    let out = tmkit(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bundle.model"), "path missing: {}", stderr(&out));
}

#[test]
fn run_prints_messages_in_order_and_exits_0() {
    let out = tmkit(&["run", &corpus("order.tm"), &corpus("order_double.tms")]);
    assert_eq!(out.status.code(), Some(0), "a refused order is handled, not a failure");
    assert_eq!(stdout(&out), "error: customer already placed an order\n");
}

#[test]
fn run_runtime_error_exits_3() {
    let dir = std::env::temp_dir().join("tmkit-cli-miss");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("miss.tms");
    // Pulling from an empty store is a runtime error.
    std::fs::write(&path, "OrderStore.rShip -> Customer\n").unwrap();
    let out = tmkit(&["run", &corpus("order.tm"), path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("error"), "{}", stderr(&out));
}

#[test]
fn run_writes_trace_files_that_validate() {
    let dir = std::env::temp_dir().join("tmkit-cli-trace");
    std::fs::create_dir_all(&dir).unwrap();
    let json_path = dir.join("trace.json");
    let out = tmkit(&[
        "run",
        &corpus("edp.tm"),
        &corpus("edp_reenroll.tms"),
        "--trace",
        json_path.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));

    // The written trace validates on its own, without re-running the script.
    let out = tmkit(&["validate", &corpus("edp.tm"), json_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("VIOLATION C7"), "{text}");
    assert!(text.ends_with("result: NOT CONFORMING (1 violation)\n"), "{text}");
}

#[test]
fn validate_conforming_exits_0_and_violating_exits_1() {
    let ok = tmkit(&["validate", &corpus("edp.tm"), &corpus("edp_conforming.tms")]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("result: CONFORMING"));
    assert!(stdout(&ok).contains("checked: C1, C3, C5, C6, C7, behavior"));

    let bad = tmkit(&["validate", &corpus("edp.tm"), &corpus("edp_no_department.tms")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("VIOLATION C1"));
}

#[test]
fn export_views_land_on_stdout() {
    let static_dot = tmkit(&["export", &corpus("flight.tm")]);
    assert_eq!(static_dot.status.code(), Some(0));
    assert!(stdout(&static_dot).starts_with("digraph model {"));

    let events = tmkit(&["export", &corpus("flight.tm"), "--view", "events"]);
    assert!(stdout(&events).contains("E1"));

    let behavior = tmkit(&["export", &corpus("flight.tm"), "--view", "behavior"]);
    assert!(stdout(&behavior).starts_with("digraph behavior {"));

    let json = tmkit(&["export", &corpus("flight.tm"), "--format", "json"]);
    assert!(stdout(&json).starts_with("{\n  \"format\": \"tmkit/1\""));
}

#[test]
fn export_can_write_to_a_file() {
    let dir = std::env::temp_dir().join("tmkit-cli-export");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("flight.dot");
    let out = tmkit(&["export", &corpus("flight.tm"), "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty(), "file output leaves stdout clean");
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.starts_with("digraph model {"));
}

#[test]
fn exported_json_reloads_through_every_command() {
    let dir = std::env::temp_dir().join("tmkit-cli-reload");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("edp.json");
    let exported = tmkit(&["export", &corpus("edp.tm"), "--format", "json"]);
    std::fs::write(&path, &exported.stdout).unwrap();

    let check = tmkit(&["check", path.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0), "{}", stderr(&check));

    let validate =
        tmkit(&["validate", path.to_str().unwrap(), &corpus("edp_wrong_department.tms")]);
    assert_eq!(validate.status.code(), Some(1));
    assert!(stdout(&validate).contains("VIOLATION C6"));
}

#[test]
fn script_syntax_errors_exit_2_with_line_numbers() {
    let dir = std::env::temp_dir().join("tmkit-cli-badscript");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.tms");
    std::fs::write(&path, "Create Airplane=A380\nFrobnicate the flight\n").unwrap();
    let out = tmkit(&["run", &corpus("flight.tm"), path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("2:"), "line number missing: {}", stderr(&out));
}
