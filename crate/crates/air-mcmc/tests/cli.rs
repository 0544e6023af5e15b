//! Black-box checks of the installed binary: frozen outputs, exit codes,
//! and the run -> decompose artifact round trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_air-mcmc"))
}

fn run(args: &[&str]) -> Output {
    binary()
        .args(args)
        .output()
        .expect("binary spawns and terminates")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

const TWO_STATE_CONFIG: &str = "\
[kernel]
family = two_state

[schedule]
beta = 1.0

[adaptation]
rule = fixed_sequence
values = 0.25,0.4
cycle = true

[run]
horizon = 200
replications = 4
seed = 7
initial_state = label:0
initial_param = 0.25
integrand = indicator:0
nu_f = 0.5

[rate]
kind = sqrt_log
epsilon = 0.5
";

fn write_config(dir: &Path) -> String {
    let path = dir.join("chain.cfg");
    fs::write(&path, TWO_STATE_CONFIG).expect("config written");
    path.to_str().expect("temp path is UTF-8").to_string()
}

#[test]
fn schedule_prints_frozen_triangular_prefix() {
    let output = run(&["schedule", "--beta", "1", "--m", "5"]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(
        stdout.contains("T = 1,3,6,10,15"),
        "adaptation times missing from: {stdout}"
    );
    assert!(
        stdout.contains("window lengths = 1,2,3,4,5"),
        "window lengths missing from: {stdout}"
    );
}

#[test]
fn analyze_two_state_quarter_reports_exact_solution_and_tight_bound() {
    let output = run(&["analyze", "--kernel", "twostate", "--gamma", "0.25"]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    for expected in [
        "stationary law = (0.500000000000, 0.500000000000)",
        "tau(P^1) = 0.500000000000",
        "u = (1.000000000000, -1.000000000000)",
        "pi(f) = 0.500000000000",
        "min slack = 0.000000000000, ok = true",
    ] {
        assert!(stdout.contains(expected), "'{expected}' missing from: {stdout}");
    }
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "[kernel]\nfamily = two_state\nbogus = 1\n").expect("config written");
    let output = run(&["run", "--config", path.to_str().expect("UTF-8 path")]);
    assert_eq!(
        output.status.code(),
        Some(2),
        "config errors must exit 2, stderr: {}",
        stderr_of(&output)
    );
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains("unknown key 'kernel.bogus'"),
        "key path missing from: {stderr}"
    );
}

#[test]
fn flag_override_is_validated_like_file_content() {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = write_config(dir.path());
    let output = run(&["run", "--config", &config, "--beta", "0"]);
    assert_eq!(
        output.status.code(),
        Some(2),
        "invalid override must exit 2, stderr: {}",
        stderr_of(&output)
    );
    assert!(
        stderr_of(&output).contains("schedule.beta must be > 0"),
        "override validation message missing from: {}",
        stderr_of(&output)
    );
}

#[test]
fn run_then_decompose_round_trip_verifies_identity() {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = write_config(dir.path());
    let out = dir.path().join("artifacts");
    let out_str = out.to_str().expect("UTF-8 path");

    let run_output = run(&["run", "--config", &config, "--out", out_str, "--quiet"]);
    assert!(run_output.status.success(), "stderr: {}", stderr_of(&run_output));
    let trajectory = out.join("study.trajectory.txt");
    assert!(trajectory.exists(), "trajectory file not written");
    let first_line = fs::read_to_string(&trajectory)
        .expect("trajectory readable")
        .lines()
        .next()
        .expect("trajectory nonempty")
        .to_string();
    assert!(
        first_line.starts_with("# manifest {\"record\":\"manifest\""),
        "trajectory must open with its manifest, got: {first_line}"
    );

    let decompose_output = run(&[
        "decompose",
        "--config",
        &config,
        "--trajectory",
        trajectory.to_str().expect("UTF-8 path"),
    ]);
    assert!(
        decompose_output.status.success(),
        "stderr: {}",
        stderr_of(&decompose_output)
    );
    let stdout = stdout_of(&decompose_output);
    for expected in ["identity residual", "identity verified", "ok = true"] {
        assert!(stdout.contains(expected), "'{expected}' missing from: {stdout}");
    }
}

#[test]
fn replicate_writes_manifest_first_study_file() {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = write_config(dir.path());
    let out = dir.path().join("rep");
    let output = run(&[
        "replicate",
        "--config",
        &config,
        "--out",
        out.to_str().expect("UTF-8 path"),
        "--quiet",
    ]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let study = fs::read_to_string(out.join("study.study.jsonl")).expect("study readable");
    let mut lines = study.lines();
    let manifest = lines.next().expect("study nonempty");
    assert!(
        manifest.starts_with("{\"record\":\"manifest\""),
        "first record must be the manifest, got: {manifest}"
    );
    assert!(
        manifest.contains("\"config_sha256\":\""),
        "manifest must carry the config hash: {manifest}"
    );
    let rest: Vec<&str> = lines.collect();
    assert_eq!(
        rest.len(),
        5,
        "expected 4 replication records plus a summary, got {} lines",
        rest.len()
    );
    assert!(
        rest.last().expect("summary line").contains("\"record\":\"summary\""),
        "file must end with the summary record"
    );
}

#[test]
fn counterexample_small_run_exits_cleanly() {
    let output = run(&["counterexample", "--replications", "200", "--quiet"]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(
        stdout.contains("stuck fraction"),
        "stuck fraction missing from: {stdout}"
    );
    assert!(
        stdout.contains("theta = 0.504428654726"),
        "theta value missing from: {stdout}"
    );
}
