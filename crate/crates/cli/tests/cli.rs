//! End-to-end tests of the `nambu` binary: config handling, exit codes,
//! CSV/summary export, and deterministic `verify` output.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nambu"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).expect("tmpdir exists");
    dir.join(name)
}

fn write_config(name: &str, body: &str) -> PathBuf {
    let path = tmp(name);
    std::fs::write(&path, body).expect("config written");
    path
}

fn run_simulate(config: &PathBuf, out: &PathBuf) -> Output {
    bin()
        .args(["simulate", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn zero_hamiltonian_freezes_all_state_columns() {
    let config = write_config(
        "zero_h.json",
        r#"{
            "metric": {"signature": [1, -1]},
            "state": {"randomHermitian": {"seed": 11}},
            "hamiltonian": {"linear": {"matrix": [[[0,0],[0,0]],[[0,0],[0,0]]]}},
            "integrator": {"step": 0.01, "steps": 50, "sampleEvery": 10}
        }"#,
    );
    let out = tmp("zero_h.csv");
    let output = run_simulate(&config, &out);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let csv = std::fs::read_to_string(&out).expect("csv written");
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("s,C1_re,C1_im"), "header: {}", lines[0]);
    assert!(lines.len() > 3, "several sample rows expected");
    // Every column except `s` must be identical across rows.
    let state_columns = |line: &str| {
        line.split(',').skip(1).map(str::to_owned).collect::<Vec<_>>()
    };
    let first = state_columns(lines[1]);
    for line in &lines[2..] {
        assert_eq!(state_columns(line), first, "state-derived columns drifted");
    }
}

#[test]
fn linear_case_summary_reports_tiny_spectral_drift() {
    let config = write_config(
        "linear_case.json",
        r#"{
            "metric": {"signature": [1, 1, 1]},
            "state": {"randomHermitian": {"seed": 3}},
            "hamiltonian": {"linear": {"matrix": [
                [[0.4,0],[0.1,0.2],[0,0]],
                [[0.1,-0.2],[-0.3,0],[0.5,0]],
                [[0,0],[0.5,0],[0.2,0]]
            ]}},
            "sFunctional": {"preset": "halfC2"},
            "integrator": {"step": 0.001, "steps": 1000, "sampleEvery": 100}
        }"#,
    );
    let out = tmp("linear_case.csv");
    let output = run_simulate(&config, &out);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp("linear_case.csv.summary.json")).expect("sidecar"),
    )
    .expect("valid summary JSON");
    let drift = summary["maxSpectralDrift"].as_f64().expect("numeric field");
    assert!(drift <= 1e-8, "eigenvalue displacement {drift:.3e} too large");
    assert!(summary["maxCasimirDrift"].as_array().expect("array").len() == 4);
}

#[test]
fn missing_metric_field_exits_2_and_names_it() {
    let config = write_config(
        "no_metric.json",
        r#"{
            "state": {"randomHermitian": {"seed": 1}},
            "hamiltonian": {"preset": "halfC2"},
            "integrator": {"step": 0.01, "steps": 5}
        }"#,
    );
    let out = tmp("no_metric.csv");
    let output = run_simulate(&config, &out);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("metric"), "stderr must name the field: {stderr}");
}

#[test]
fn syntax_error_reports_line_number() {
    let config = write_config(
        "broken.json",
        "{\n  \"metric\": {\"signature\": [1, -1]},\n  \"state\": oops\n}\n",
    );
    let out = tmp("broken.csv");
    let output = run_simulate(&config, &out);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 3"), "stderr must cite the line: {stderr}");
}

#[test]
fn pseudo_unitary_growth_exits_3_with_step_index() {
    // With g = diag(1, -1) and h = σ_x the generator K = g·hᵀ has
    // eigenvalues ±i, so the flow e^{isK} ρ e^{-isK}-like conjugation grows
    // as e^{2s} and must trip the divergence cap.
    let config = write_config(
        "diverge.json",
        r#"{
            "metric": {"signature": [1, -1]},
            "state": {"randomHermitian": {"seed": 5}},
            "hamiltonian": {"linear": {"matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}},
            "integrator": {"step": 0.01, "steps": 3000, "sampleEvery": 500}
        }"#,
    );
    let out = tmp("diverge.csv");
    let output = run_simulate(&config, &out);
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("step"), "stderr must name the step: {stderr}");
}

#[test]
fn dirac_preset_runs_end_to_end() {
    let config = write_config(
        "dirac.json",
        r#"{
            "metric": {"dirac1p1": {"nt": 3, "nz": 2}},
            "state": {"randomHermitian": {"seed": 9}},
            "hamiltonian": {"preset": "dirac1p1", "nt": 3, "nz": 2},
            "integrator": {"step": 0.001, "steps": 100, "sampleEvery": 50}
        }"#,
    );
    let out = tmp("dirac.csv");
    let output = run_simulate(&config, &out);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(&out).expect("csv written");
    let header = csv.lines().next().expect("nonempty");
    // dim 24 lattice: 10 fixed columns + 24 eigenvalue re/im pairs.
    assert_eq!(header.split(',').count(), 10 + 2 * 24);
}

#[test]
fn multiparticle_subsystem_config_runs() {
    let config = write_config(
        "multi.json",
        r#"{
            "particles": [{"signature": [1, -1]}, {"signature": [1, 1]}],
            "state": {"randomHermitian": {"seed": 13}},
            "hamiltonian": {"sum": [
                [1.0, {"subsystem": {"keep": [0], "inner": {"linear": {"matrix": [[[0.2,0],[0,0.4]],[[0,-0.4],[-0.1,0]]]}}}}],
                [0.5, {"subsystem": {"keep": [1], "inner": {"casimirPoly": {"terms": [{"coeff": 1.0, "powers": {"C2": 1}}]}}}}]
            ]},
            "sFunctional": {"casimirPoly": {"terms": [
                {"coeff": 0.5, "powers": {"C2": 1}},
                {"coeff": 0.3, "powers": {"C1": 2}}
            ]}},
            "integrator": {"step": 0.005, "steps": 200, "sampleEvery": 40}
        }"#,
    );
    let out = tmp("multi.csv");
    let output = run_simulate(&config, &out);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    // Casimirs must be conserved here too.
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp("multi.csv.summary.json")).expect("sidecar"),
    )
    .expect("valid summary JSON");
    for drift in summary["maxCasimirDrift"].as_array().expect("array") {
        assert!(drift.as_f64().expect("numeric") <= 1e-8);
    }
}

#[test]
fn verify_casimir_is_deterministic_and_passes() {
    let run = || {
        bin()
            .args(["verify", "casimir", "--seed", "7"])
            .output()
            .expect("binary runs")
    };
    let first = run();
    let second = run();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout, "verify output must be byte-identical");
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert!(stdout.contains("suite casimir: PASS"), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn verify_all_passes_every_suite() {
    let output = bin()
        .args(["verify", "all", "--seed", "7"])
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    for suite in ["casimir", "antisymmetry", "separation", "spectral", "dirac"] {
        assert!(stdout.contains(&format!("suite {suite}: PASS")), "{stdout}");
    }
}

#[test]
fn verify_supports_dim_override() {
    let output = bin()
        .args(["verify", "antisymmetry", "--seed", "3", "--dim", "5"])
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("d=5"), "{stdout}");

    let bad = bin()
        .args(["verify", "casimir", "--seed", "3", "--dim", "40"])
        .output()
        .expect("binary runs");
    assert_eq!(bad.status.code(), Some(2));
}
