use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

use phs_kit::discretize::forced_oscillator;
use phs_kit::io::{read_system_file, read_trajectory_file, SystemFileV1};

fn phs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phs-kit")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    phs(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn example(dir: &Path, name: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    assert_eq!(code(&["example", name, "--out", s(&p)]), 0);
    p
}

#[test]
fn example_files_validate_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["oscillator", "damped_oscillator", "string", "diffusion"] {
        let p = example(dir.path(), name);
        assert_eq!(code(&["validate", s(&p)]), 0, "{name}");
        let file = read_system_file(&p).unwrap();
        let again = SystemFileV1::from_json(&file.to_json()).unwrap();
        assert_eq!(again.to_json(), file.to_json());
    }
    let out = phs(&["example", "string", "--N", "4", "--force", "tanh"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dims"], json!({"n_s": 9, "n_r": 0, "n_p": 2}));
}

#[test]
fn broken_structure_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = example(dir.path(), "damped_oscillator");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    v["G"][2][1] = json!(-3.0);
    std::fs::write(&p, v.to_string()).unwrap();
    let out = phs(&["validate", s(&p)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_and_parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"version\": \"1\", ").unwrap();
    assert_eq!(code(&["validate", s(&bad)]), 2);
    let unknown = dir.path().join("unknown.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(example(dir.path(), "oscillator")).unwrap()).unwrap();
    v["extra"] = json!(1);
    std::fs::write(&unknown, v.to_string()).unwrap();
    assert_eq!(code(&["validate", s(&unknown)]), 2);

    let osc = example(dir.path(), "oscillator");
    assert_eq!(code(&["simulate", s(&osc), "--dt", "0"]), 2);
    assert_eq!(code(&["simulate", s(&osc), "--dt", "-1e-3"]), 2);
    assert_eq!(code(&["simulate", s(&osc), "--x0", "1"]), 2);
    assert_eq!(code(&["example", "pendulum"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn corrupted_and_tampered_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let sys = example(dir.path(), "damped_oscillator");
    let csv = dir.path().join("t.csv");
    assert_eq!(code(&["simulate", s(&sys), "--t1", "2", "--out", s(&csv)]), 0);
    assert_eq!(code(&["check", s(&sys), s(&csv), "--mode", "all"]), 0);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[10] = lines[10].replacen(',', ",oops", 1);
    let corrupted = dir.path().join("corrupted.csv");
    std::fs::write(&corrupted, lines.join("\n")).unwrap();
    assert_eq!(code(&["check", s(&sys), s(&corrupted)]), 2);

    let mut traj = read_trajectory_file(&csv).unwrap();
    traj.x[100][0] += 0.05;
    let tampered = dir.path().join("tampered.csv");
    phs_kit::io::write_trajectory_file(&tampered, &traj).unwrap();
    for mode in ["weak", "strong", "energy"] {
        assert_eq!(code(&["check", s(&sys), s(&tampered), "--mode", mode]), 1, "{mode}");
    }

    let osc = example(dir.path(), "oscillator");
    assert_eq!(code(&["check", s(&osc), s(&csv)]), 2);
}

#[test]
fn step_input_passes_only_at_a_loose_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let file = SystemFileV1::from_system(&forced_oscillator(), json!({"x0": [1.0, 0.0], "t1": 1.0, "dt": 1e-3})).unwrap();
    let sys = dir.path().join("forced.json");
    std::fs::write(&sys, file.to_json()).unwrap();
    let csv = dir.path().join("forced.csv");
    assert_eq!(code(&["simulate", s(&sys), "--input", "0=step(0.5,1)", "--out", s(&csv)]), 0);
    assert_eq!(code(&["check", s(&sys), s(&csv), "--mode", "weak", "--tol", "1e-4"]), 0);
    assert_eq!(code(&["check", s(&sys), s(&csv), "--mode", "all", "--tol", "1e-4"]), 0);
    assert_eq!(code(&["check", s(&sys), s(&csv), "--mode", "weak", "--tol", "1e-6"]), 1);
}

#[test]
fn simulation_output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let sys = example(dir.path(), "string");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_phs-kit"))
            .args(["simulate", s(&sys), "--t1", "0.2"])
            .env("PHS_KIT_THREADS", threads)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    assert!(a.status.success() && b.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn solver_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let sys = example(dir.path(), "string");
    let args = ["simulate", s(&sys), "--dt", "0.5", "--t1", "1", "--newton-tol", "1e-30", "--newton-max-iter", "1"];
    assert_eq!(code(&args), 3);
}

#[test]
fn prescribed_traces_start_from_a_consistent_state() {
    let dir = tempfile::tempdir().unwrap();
    let diffusion = dir.path().join("trace.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(example(dir.path(), "diffusion")).unwrap()).unwrap();
    v["causality"] = json!(["flow", "flow"]);
    std::fs::write(&diffusion, v.to_string()).unwrap();
    let out = phs(&["simulate", s(&diffusion), "--input", "0=1", "--input", "1=1", "--t1", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
