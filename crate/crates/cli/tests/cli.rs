//! Black-box tests of the command-line interface: exit codes, stream
//! separation, and the documented output formats.

use std::path::PathBuf;
use std::process::{Command, Output};

fn chart(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../charts")
        .join(format!("{name}.chart"))
}

fn geoscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn analyze_emits_json_report() {
    let out = geoscope(&[
        "analyze",
        chart("euclid2").to_str().unwrap(),
        "--point",
        "0,0",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["killing_dim"], 3);
    assert_eq!(v["singer_invariant"], 0);
    assert_eq!(v["config"]["rank_tol"], 1e-8);
    assert_eq!(v["config"]["max_valence"], 8);
}

#[test]
fn missing_chart_file_is_input_error() {
    let out = geoscope(&["analyze", "no-such.chart", "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_point_is_input_error() {
    let out = geoscope(&[
        "analyze",
        chart("euclid2").to_str().unwrap(),
        "--point",
        "zero,0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = geoscope(&[
        "analyze",
        chart("euclid2").to_str().unwrap(),
        "--point",
        "0,0,0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn degenerate_point_is_numerical_error() {
    let out = geoscope(&[
        "analyze",
        chart("sphere").to_str().unwrap(),
        "--point",
        "0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("domain") || msg.contains("definite"), "{msg}");
}

#[test]
fn unknown_flag_is_input_error() {
    let out = geoscope(&["analyze", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scan_flags_degenerate_nodes_and_continues() {
    let out = geoscope(&[
        "scan",
        chart("sphere").to_str().unwrap(),
        "--grid",
        "[0,1.6]x[0,0.5]:2x2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("th,ph,status,cohomogeneity,killing_dim"));
    assert!(lines[1].contains("degenerate"));
    assert!(lines[2].contains("degenerate"));
    assert!(lines[3].contains(",ok,0,3,0,2,1,true,"));
    assert!(lines[4].contains(",ok,"));
}

#[test]
fn scan_rows_identical_on_homogeneous_chart() {
    let out = geoscope(&[
        "scan",
        chart("euclid2").to_str().unwrap(),
        "--grid",
        "[0,1]x[0,1]:2x2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.contains(",ok,0,3,0,2,1,true,"), "{line}");
    }
}

#[test]
fn extend_writes_csv_and_summary() {
    let dir = std::env::temp_dir().join("geoscope-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let csv_path = dir.join("field.csv");
    let out = geoscope(&[
        "extend",
        chart("bump").to_str().unwrap(),
        "--base",
        "0,0",
        "--element",
        "0",
        "--grid",
        "[-1,1]x[-1,1]:5x5",
        "--steps",
        "25",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["killing_dim"], 1);
    assert!(summary["max_sym_residual"].as_f64().unwrap() < 1e-5);
    assert!(summary["path_independence"].as_f64().unwrap() < 1e-5);

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "coord_1,coord_2,v_1,v_2,B_11,B_12,B_21,B_22"
    );
    assert_eq!(csv.lines().count(), 26);
    std::fs::remove_file(&csv_path).ok();
}

#[test]
fn extend_element_out_of_range() {
    let out = geoscope(&[
        "extend",
        chart("bump").to_str().unwrap(),
        "--base",
        "0,0",
        "--element",
        "3",
        "--grid",
        "[-1,1]x[-1,1]:3x3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("1 element"), "{msg}");
}

#[test]
fn scan_jobs_output_matches_serial() {
    let bump = chart("bump");
    let args_base = [
        "scan",
        bump.to_str().unwrap(),
        "--grid",
        "[-1,1]x[-1,1]:3x3",
    ];
    let serial = geoscope(&args_base);
    let mut with_jobs: Vec<&str> = args_base.to_vec();
    with_jobs.extend(["--jobs", "4"]);
    let parallel = geoscope(&with_jobs);
    assert!(serial.status.success() && parallel.status.success());
    assert_eq!(serial.stdout, parallel.stdout);
}
