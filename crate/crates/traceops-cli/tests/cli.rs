//! End-to-end tests of the `traceops` binary: exit codes, report layout,
//! determinism, and config validation.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_traceops"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn write_config(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("traceops-cli-tests");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn scaling_pass_is_exit_zero_with_fitted_exponents() {
    let out = run(&["check-scaling", "--phi", "power:0.5", "--bounds", "0,1"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let a = v["results"]["a_hat"].as_f64().unwrap();
    let b = v["results"]["b_hat"].as_f64().unwrap();
    assert!((a - 0.5).abs() < 1e-3, "a_hat {a}");
    assert!((b - 0.5).abs() < 1e-3, "b_hat {b}");
    assert_eq!(v["results"]["member"], serde_json::Value::Bool(true));
}

#[test]
fn scaling_refutation_is_exit_one() {
    let out = run(&["check-scaling", "--phi", "power:1.5", "--bounds", "0,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("check failed"));
    // The report is still written before the failure is signalled.
    assert!(!stdout(&out).is_empty());
}

#[test]
fn malformed_json_is_exit_two_with_position() {
    let path = write_config("malformed.json", "{\"command\": theta}");
    let out = run(&["theta", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 1"), "missing position: {err}");
    assert!(err.contains("column"), "missing position: {err}");
}

#[test]
fn unknown_config_key_is_exit_two_naming_the_key() {
    let path = write_config("unknown.json", r#"{"command":"theta","bogus_key":3}"#);
    let out = run(&["theta", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus_key"));
}

#[test]
fn missing_command_field_is_exit_two() {
    let path = write_config("nocmd.json", r#"{"alpha":0.5}"#);
    let out = run(&["theta", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("command"));
}

#[test]
fn command_mismatch_is_exit_two() {
    let path = write_config("mismatch.json", r#"{"command":"sonine"}"#);
    let out = run(&["theta", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("sonine") && err.contains("theta"), "{err}");
}

#[test]
fn unwritable_output_path_is_exit_two() {
    let out = run(&[
        "check-scaling",
        "--phi",
        "power:0.5",
        "--output",
        "/nonexistent-dir/report.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot write report"));
}

#[test]
fn unknown_subcommand_is_exit_two() {
    let out = run(&["definitely-not-a-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn minimal_theta_config_fills_and_echoes_defaults() {
    let path = write_config(
        "theta-min.json",
        r#"{"command":"theta","alpha":0.5,"t":1,"lambda":1}"#,
    );
    let out = run(&["theta", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let config_line = text
        .lines()
        .find(|l| l.starts_with("# config:"))
        .expect("config echo line");
    assert!(config_line.contains("\"n\":100000"), "{config_line}");
    assert!(config_line.contains("\"seed\":42"), "{config_line}");
    // Stated column order of the curve report.
    assert!(text.lines().any(|l| l == "t,lambda,theta,ci"), "{text}");
}

#[test]
fn theta_report_is_byte_identical_across_runs() {
    let path = write_config(
        "theta-det.json",
        r#"{"command":"theta","alpha":0.5,"t":[0.5,1],"lambda":[1,2],"n":2000}"#,
    );
    let a = run(&["theta", "--config", path.to_str().unwrap()]);
    let b = run(&["theta", "--config", path.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn output_file_matches_stdout() {
    let dir = std::env::temp_dir().join("traceops-cli-tests");
    fs::create_dir_all(&dir).unwrap();
    let report = dir.join("scaling-report.json");
    let out = run(&[
        "check-scaling",
        "--phi",
        "caputo:0.3",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let on_disk = fs::read_to_string(&report).unwrap();
    assert_eq!(on_disk, stdout(&out));
}

#[test]
fn json_report_round_trips_and_carries_meta() {
    let out = run(&["kernel-info", "--format", "json"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["meta"]["tool"], "traceops");
    assert_eq!(v["meta"]["seed"], 42);
    assert_eq!(v["meta"]["config"]["command"], "kernel-info");
    assert!(v["meta"]["grid"].as_str().unwrap().contains("x64"));
}

#[test]
fn simulate_tiny_budget_is_exit_three() {
    let path = write_config("sim-tiny.json", r#"{"command":"simulate","n":10}"#);
    let out = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("inconclusive"));
}

#[test]
fn roundtrip_default_battery_has_22_rows() {
    let out = run(&["roundtrip"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty() && !l.starts_with("case_id"))
        .collect();
    assert_eq!(data_rows.len(), 22);
    assert!(text
        .lines()
        .any(|l| l == "case_id,mode,alpha,gamma,p,ext_ratio,trace_ratio,residual,ci"));
    // Local rows leave the alpha column empty; nonlocal rows fill it.
    assert!(data_rows.iter().any(|r| r.contains(",local,,")));
    assert!(data_rows.iter().any(|r| r.starts_with("nonlocal_")));
}

#[test]
fn explicit_battery_case_config_is_honored() {
    let path = write_config(
        "battery-one.json",
        r#"{"command":"roundtrip","battery":[{"mode":"local","gamma":0.5,"k":2}]}"#,
    );
    let out = run(&["roundtrip", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let data: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty() && !l.starts_with("case_id"))
        .collect();
    assert_eq!(data.len(), 1);
    assert!(data[0].starts_with("local_g0.5_k2,local,"), "{}", data[0]);
}

#[test]
fn battery_rejects_local_case_with_alpha() {
    let path = write_config(
        "battery-bad.json",
        r#"{"command":"roundtrip","battery":[{"mode":"local","alpha":0.5}]}"#,
    );
    let out = run(&["roundtrip", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn floats_are_rendered_with_twelve_significant_digits() {
    let out = run(&["theta"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let data_line = text
        .lines()
        .find(|l| !l.starts_with('#') && l.contains('e') && l.contains(','))
        .and_then(|l| if l.starts_with("t,") { None } else { Some(l) });
    // Find the first numeric data row and check the mantissa width.
    let row = data_line.unwrap_or_else(|| {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("t,"))
            .next()
            .unwrap()
    });
    let field = row.split(',').next().unwrap();
    let mantissa = field.split('e').next().unwrap();
    let digits: usize = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
    assert_eq!(digits, 12, "field {field}");
}

#[test]
fn every_subcommand_has_a_selftest_flag() {
    // Fast selftests run for real; the heavier ones only prove the flag parses
    // via --help (clap exits 0 when the flag exists in the help text).
    for cmd in [
        "check-scaling",
        "kernel-info",
        "extend-kernel",
        "simulate",
        "theta",
        "sonine",
        "ap-constant",
        "hardy",
        "extend-weight",
        "interp-norm",
        "besov-norm",
        "solve-volterra",
        "extension",
        "trace",
        "roundtrip",
        "finite-interval",
    ] {
        let out = run(&[cmd, "--help"]);
        assert!(out.status.success(), "{cmd} --help failed");
        assert!(
            stdout(&out).contains("--selftest"),
            "{cmd} lacks --selftest"
        );
    }
}

#[test]
fn quick_selftests_pass() {
    for cmd in ["check-scaling", "interp-norm", "besov-norm", "ap-constant"] {
        let out = run(&[cmd, "--selftest"]);
        assert!(
            out.status.success(),
            "{cmd} --selftest: {}",
            stderr(&out)
        );
        assert!(stdout(&out).contains("selftest passed"));
    }
}

#[test]
fn config_echo_round_trips_through_the_loader() {
    let out = run(&["sonine"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let echoed = v["meta"]["config"].clone();
    // Re-feed the echoed config: it must load and reproduce the same report.
    let path = write_config("sonine-echo.json", &echoed.to_string());
    let again = run(&["sonine", "--config", path.to_str().unwrap()]);
    assert!(again.status.success(), "stderr: {}", stderr(&again));
    assert_eq!(stdout(&again), text);
}
