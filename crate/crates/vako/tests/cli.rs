//! End-to-end tests of the command-line interface: each subcommand run as a
//! real subprocess against problem files in a temporary directory, checking
//! the JSON reports, the CSV trajectories, and the error contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn vako() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vako"))
}

fn write_file(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn heisenberg_file(dir: &Path) -> PathBuf {
    write_file(dir, "heisenberg.json", r#"{"problem": {"builtin": "heisenberg"}}"#)
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is not valid JSON")
}

#[test]
fn solve_ivp_reports_and_writes_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let file = heisenberg_file(dir.path());
    let csv = dir.path().join("traj.csv");
    let out = vako()
        .args(["solve-ivp"])
        .arg(&file)
        .args(["--q0", "0,0,0", "--p0", "1,0,0", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["problem"], "heisenberg");
    assert_eq!(report["steps"], 400);
    assert_eq!(report["samples"], 401);
    assert!(report["energy_drift"].as_f64().unwrap() <= 1e-12);
    // Straight solution: q(1) = (1, 0, 0).
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,q_1,q_2,q_3,p_1,p_2,p_3,u_1,u_2,H");
    let last: Vec<f64> =
        text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-15, "final time {}", last[0]);
    assert!((last[1] - 1.0).abs() <= 1e-9, "final x {}", last[1]);
    assert!(last[2].abs() <= 1e-9 && last[3].abs() <= 1e-9);
    assert_eq!(text.lines().count(), 402);
}

#[test]
fn solve_bvp_solution_passes_check_critical() {
    let dir = tempfile::tempdir().unwrap();
    let file = heisenberg_file(dir.path());
    let out = vako()
        .current_dir(dir.path())
        .args(["solve-bvp"])
        .arg(&file)
        .args(["--out", "sol"])
        .output()
        .unwrap();
    let report = stdout_json(&out);
    let solutions = report["solutions"].as_array().unwrap();
    assert_eq!(solutions.len(), 1);
    let sol = &solutions[0];
    assert!((sol["action"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert!(sol["residuals"]["end_membership"].as_f64().unwrap() <= 1e-10);
    let csv = dir.path().join(sol["csv"].as_str().unwrap());
    assert!(csv.exists());

    let out = vako()
        .args(["check-critical"])
        .arg(&file)
        .args(["--trajectory"])
        .arg(&csv)
        .output()
        .unwrap();
    let check = stdout_json(&out);
    assert!(check["first_variation_max"].as_f64().unwrap() <= 1e-4);
    assert!(check["el_residual_max"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn abnormal_flags_the_martinet_line_from_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_file(dir.path(), "martinet.json", r#"{"problem": {"builtin": "martinet"}}"#);
    let csv = dir.path().join("line.csv");
    // p = (1, 0, 0) drives u = (1, 0): the singular line y = z = 0.
    let out = vako()
        .args(["solve-ivp"])
        .arg(&file)
        .args(["--q0", "0,0,0", "--p0", "1,0,0", "--steps", "800", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    stdout_json(&out);
    let out = vako()
        .args(["abnormal"])
        .arg(&file)
        .args(["--trajectory"])
        .arg(&csv)
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "singular");
    assert_eq!(report["basis_dimension"], 1);
    assert_eq!(report["oracle_annihilator_dimension"], 1);
    assert!(report["oracle_agreement_angle"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn abnormal_line_probe_matches_the_trajectory_route() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_file(dir.path(), "martinet.json", r#"{"problem": {"builtin": "martinet"}}"#);
    let out = vako()
        .args(["abnormal"])
        .arg(&file)
        .args(["--line-probe"])
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "singular");
    assert_eq!(report["basis_dimension"], 1);

    // The same probe on the heisenberg frame is regular: contact
    // distributions carry no singular curves.
    let heis = heisenberg_file(dir.path());
    let out = vako().args(["abnormal"]).arg(&heis).args(["--line-probe"]).output().unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "regular");
    assert!(report["oracle_agreement_angle"].is_null());
}

#[test]
fn legendre_check_is_clean_on_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let file = heisenberg_file(dir.path());
    let out =
        vako().args(["legendre-check"]).arg(&file).args(["--samples", "25"]).output().unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["samples"], 25);
    assert!(report["involution_max_dev"].as_f64().unwrap() <= 1e-7);
    assert!(report["mutual_inverse_max_dev"].as_f64().unwrap() <= 1e-6);
    assert!(report["envelope_max_dev"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn check_critical_rejects_a_non_horizontal_trajectory_numerically() {
    let dir = tempfile::tempdir().unwrap();
    let file = heisenberg_file(dir.path());
    // A vertical line is maximally non-horizontal for the heisenberg frame:
    // theta(gamma') = 1 everywhere, far beyond the 1e-2 projection gate.
    let mut csv = String::from("t,q_1,q_2,q_3,p_1,p_2,p_3,u_1,u_2,H\n");
    for s in 0..=100 {
        let t = s as f64 / 100.0;
        csv.push_str(&format!("{t:.16e},0,0,{t:.16e},0,0,0,0,0,0\n"));
    }
    let path = write_file(dir.path(), "vertical.csv", &csv);
    let out = vako()
        .args(["check-critical"])
        .arg(&file)
        .args(["--trajectory"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "numerical failure should exit 3");
    assert!(out.stdout.is_empty(), "no report on failure");
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = heisenberg_file(dir.path());

    // Unknown field in the problem file.
    let bad = write_file(dir.path(), "bad.json", r#"{"problem": {"builtin": "heisenberg"}, "x": 1}"#);
    let out = vako().args(["legendre-check"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Missing problem file.
    let out = vako()
        .args(["legendre-check"])
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Trajectory with a tampered header.
    let tampered = write_file(
        dir.path(),
        "tampered.csv",
        "time,q_1,q_2,q_3,p_1,p_2,p_3,u_1,u_2,H\n0,0,0,0,0,0,0,0,0,0\n1,1,0,0,1,0,0,1,0,0.5\n",
    );
    let out = vako()
        .args(["check-critical"])
        .arg(&file)
        .args(["--trajectory"])
        .arg(&tampered)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("header"), "error should mention the header: {err}");

    // Variation step outside the supported bracket.
    let ok_csv = write_file(
        dir.path(),
        "short.csv",
        "t,q_1,q_2,q_3,p_1,p_2,p_3,u_1,u_2,H\n0,0,0,0,1,0,0,1,0,0.5\n1,1,0,0,1,0,0,1,0,0.5\n",
    );
    let out = vako()
        .args(["check-critical"])
        .arg(&file)
        .args(["--trajectory"])
        .arg(&ok_csv)
        .args(["--eps", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Dimension mismatch between the problem and the initial data.
    let out = vako()
        .args(["solve-ivp"])
        .arg(&file)
        .args(["--q0", "0,0", "--p0", "1,0", "--out"])
        .arg(dir.path().join("never.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("never.csv").exists());
}

#[test]
fn inline_problems_load_and_run() {
    let dir = tempfile::tempdir().unwrap();
    // Fully inline heisenberg: frame, annihilator, complement, and the
    // kinetic Lagrangian as polynomial data.
    let inline = write_file(
        dir.path(),
        "inline.json",
        r#"{
  "problem": {"inline": {
    "n": 3, "k": 2,
    "x": [
      [[{"c": 1.0, "powers": [0, 0, 0]}], [], [{"c": -0.5, "powers": [0, 1, 0]}]],
      [[], [{"c": 1.0, "powers": [0, 0, 0]}], [{"c": 0.5, "powers": [1, 0, 0]}]]
    ],
    "theta": [
      [[{"c": 0.5, "powers": [0, 1, 0]}], [{"c": -0.5, "powers": [1, 0, 0]}], [{"c": 1.0, "powers": [0, 0, 0]}]]
    ],
    "xprime": [
      [[], [], [{"c": 1.0, "powers": [0, 0, 0]}]]
    ],
    "lagrangian": [
      {"c": 0.5, "powers": [0, 0, 0, 2, 0]},
      {"c": 0.5, "powers": [0, 0, 0, 0, 2]}
    ]
  }},
  "bvp": {
    "start": {"point": [0.0, 0.0, 0.0]},
    "end": {"point": [1.0, 0.0, 0.0]},
    "p_guess": [0.9, 0.1, 0.2]
  }
}"#,
    );
    let out = vako()
        .current_dir(dir.path())
        .args(["solve-bvp"])
        .arg(&inline)
        .args(["--out", "inline-sol"])
        .output()
        .unwrap();
    let report = stdout_json(&out);
    let sol = &report["solutions"][0];
    assert!(
        (sol["action"].as_f64().unwrap() - 0.5).abs() <= 1e-9,
        "inline heisenberg action {}",
        sol["action"]
    );
}
