use std::path::PathBuf;
use std::process::{Command, Output};

use gridfeas_cli::{verify_report, AnalysisReport, CertifyReport, LmiVerdictName, PmaxReport, VerdictReport, VertexReport};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn gridfeas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfeas"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = gridfeas(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn analyze(grid: &str, demand: &str, extra: &[&str]) -> AnalysisReport {
    let path = fixture(grid);
    let mut args = vec!["analyze", "--grid", path.to_str().unwrap(), "--demand", demand];
    args.extend_from_slice(extra);
    let text = run_ok(&args);
    let report: AnalysisReport = serde_json::from_str(&text).unwrap();
    assert_eq!(verify_report(&report), Vec::<String>::new());
    report
}

#[test]
fn validate_exit_codes() {
    let ok = run_ok(&["validate", "--grid", fixture("example1.json").to_str().unwrap()]);
    assert!(ok.starts_with("OK"));

    let out = gridfeas(&["validate", "--grid", fixture("disconnected.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let reducible = fixture("example2_w0.json");
    let out = gridfeas(&["validate", "--grid", reducible.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("component 0: 1") && err.contains("component 1: 2"), "{err}");

    let text = run_ok(&["--allow-reducible", "validate", "--grid", reducible.to_str().unwrap()]);
    assert!(text.contains("component 1: 2") && text.contains("OK"));

    let out = gridfeas(&["validate", "--grid", "/nonexistent/grid.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"nodes": [], "lines": [], "extra": 1}"#).unwrap();
    let out = gridfeas(&["validate", "--grid", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_interior_point() {
    let report = analyze("example1.json", "0.5", &[]);
    let VerdictReport::Interior { voltages, perron_root } = &report.verdict else {
        panic!("expected interior");
    };
    assert!((voltages[0] - (0.5 + (1.0f64 / 12.0).sqrt())).abs() < 1e-9);
    assert!(*perron_root > 0.0);
    assert!(report.certificate.is_none());
    let d = report.dissipation.as_ref().unwrap();
    assert!((d.full - d.reduced).abs() < 1e-12);
}

#[test]
fn analyze_infeasible_carries_certificate() {
    let report = analyze("example1.json", "1.0", &[]);
    let VerdictReport::Infeasible { theta_star, .. } = report.verdict else {
        panic!("expected infeasible");
    };
    assert!((theta_star - 0.75).abs() < 1e-9);
    let cert = report.certificate.unwrap();
    let h = cert.halfspace.unwrap();
    assert!((h.lambda[0] - 1.0).abs() < 1e-12 && (h.s - 0.75).abs() < 1e-9);
    assert_eq!(cert.lmi.verdict, LmiVerdictName::Pd);
}

#[test]
fn analyze_p_max_is_boundary() {
    let report = analyze("example2_w2.json", "0.75,0.5", &[]);
    let VerdictReport::Boundary { voltages, .. } = report.verdict else {
        panic!("expected boundary");
    };
    assert!((voltages[0] - 0.5).abs() < 1e-6 && (voltages[1] - 0.5).abs() < 1e-6);
}

#[test]
fn report_round_trips_and_detects_tampering() {
    let report = analyze("example2_w2.json", "[0.9, 0.7]", &["--trace"]);
    let text = gridfeas_cli::to_json(&report);
    let back: AnalysisReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(gridfeas_cli::to_json(&back), text);

    let mut tampered = report.clone();
    tampered.certificate.as_mut().unwrap().halfspace.as_mut().unwrap().s += 1.0;
    assert!(!verify_report(&tampered).is_empty());
    let mut tampered = report;
    tampered.certificate.as_mut().unwrap().lmi.matrix[0][0] += 1e-3;
    assert!(!verify_report(&tampered).is_empty());
}

#[test]
fn floats_have_seventeen_significant_digits() {
    let text = run_ok(&["pmax", "--grid", fixture("example1.json").to_str().unwrap()]);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(value["pmax"].is_array());
    for token in text.split(['[', ']', ',', ':', '{', '}']) {
        if token.starts_with('"') {
            continue;
        }
        if let Some((mantissa, _)) = token.split_once('e') {
            let digits = mantissa.chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{token}");
        }
    }
}

#[test]
fn analyze_trace_and_oracle() {
    let report = analyze("three_loads.json", "0.1,0.05,0.08", &["--trace", "--oracle"]);
    let trace = report.trace.unwrap();
    assert!(trace.windows(2).all(|w| w[0].theta < w[1].theta));
    assert_eq!(trace.last().unwrap().theta, 1.0);
    let oracle = report.oracle.unwrap();
    assert_eq!(oracle.iter().filter(|s| s.matches_continuation).count(), 1);
    assert!(oracle[0].matches_continuation);
}

#[test]
fn demand_from_file_and_shape_errors() {
    let dir = tempfile::tempdir().unwrap();
    let demand = dir.path().join("demand.json");
    std::fs::write(&demand, "[0.5]").unwrap();
    let arg = format!("@{}", demand.display());
    let grid = fixture("example1.json");
    let report: AnalysisReport =
        serde_json::from_str(&run_ok(&["analyze", "--grid", grid.to_str().unwrap(), "--demand", &arg])).unwrap();
    assert!(matches!(report.verdict, VerdictReport::Interior { .. }));

    let out = gridfeas(&["analyze", "--grid", grid.to_str().unwrap(), "--demand", "0.1,0.2"]);
    assert_eq!(out.status.code(), Some(4));

    let negative = run_ok(&["analyze", "--grid", grid.to_str().unwrap(), "--demand", "-2"]);
    assert!(negative.contains("\"interior\""));

    let mut spec = gridfeas::GridSpec::default();
    spec.source("s", 1.0);
    for i in 0..5 {
        spec.load(&format!("l{i}")).line(&format!("l{i}"), "s", 1.0);
        if i > 0 {
            spec.line(&format!("l{i}"), &format!("l{}", i - 1), 1.0);
        }
    }
    let big = dir.path().join("five.json");
    std::fs::write(&big, spec.to_json()).unwrap();
    let out = gridfeas(&["analyze", "--grid", big.to_str().unwrap(), "--demand", "0,0,0,0,0", "--oracle"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn pmax_values_and_scaling() {
    let one: PmaxReport = serde_json::from_str(&run_ok(&["pmax", "--grid", fixture("example1.json").to_str().unwrap()])).unwrap();
    assert!((one.pmax[0] - 0.75).abs() < 1e-12 && (one.voltage[0] - 0.5).abs() < 1e-12);

    let two: PmaxReport =
        serde_json::from_str(&run_ok(&["pmax", "--grid", fixture("example2_w2.json").to_str().unwrap()])).unwrap();
    assert!((two.pmax[0] - 0.75).abs() < 1e-12 && (two.pmax[1] - 0.5).abs() < 1e-12);

    let text = std::fs::read_to_string(fixture("example2_w2.json")).unwrap();
    let mut spec = gridfeas::GridSpec::from_json(&text).unwrap();
    for line in &mut spec.lines {
        line.conductance *= 2.0;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scaled.json");
    std::fs::write(&path, spec.to_json()).unwrap();
    let scaled: PmaxReport = serde_json::from_str(&run_ok(&["pmax", "--grid", path.to_str().unwrap()])).unwrap();
    for k in 0..2 {
        assert!((scaled.pmax[k] - 2.0 * two.pmax[k]).abs() < 1e-12);
        assert!((scaled.voltage[k] - two.voltage[k]).abs() < 1e-12);
    }
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "alpha,p1,p2,v1,v2,lambda1,lambda2,perron_residual");
    lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn boundary_csv_is_sorted_and_passes_through_p_max() {
    let rows = csv_rows(&run_ok(&["boundary", "--grid", fixture("example2_w2.json").to_str().unwrap()]));
    assert_eq!(rows.len(), 256);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    let gap = rows
        .windows(2)
        .map(|w| {
            let (a, b) = ((w[0][1], w[0][2]), (w[1][1], w[1][2]));
            let ab = (b.0 - a.0, b.1 - a.1);
            let ap = (0.75 - a.0, 0.5 - a.1);
            let t = ((ap.0 * ab.0 + ap.1 * ab.1) / (ab.0 * ab.0 + ab.1 * ab.1)).clamp(0.0, 1.0);
            ((a.0 + t * ab.0 - 0.75).powi(2) + (a.1 + t * ab.1 - 0.5).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(gap < 1e-3, "{gap}");
    assert!(rows.iter().all(|r| r[7] <= 1e-6));
}

#[test]
fn boundary_small_scan_formats_and_shape() {
    let grid = fixture("example2_w2.json");
    let rows = csv_rows(&run_ok(&["boundary", "--grid", grid.to_str().unwrap(), "--rays", "4"]));
    assert_eq!(rows.len(), 4);

    let json = run_ok(&["boundary", "--grid", grid.to_str().unwrap(), "--rays", "16", "--format", "json"]);
    let vertices: Vec<VertexReport> = serde_json::from_str(&json).unwrap();
    assert_eq!(vertices.len(), 16);

    let reducible = fixture("example2_w0.json");
    let rows = csv_rows(&run_ok(&["--allow-reducible", "boundary", "--grid", reducible.to_str().unwrap(), "--rays", "32"]));
    assert!(rows.iter().any(|r| (r[1] - 0.75).abs() < 1e-9));
    assert!(rows.iter().any(|r| (r[2] - 0.5).abs() < 1e-9));

    let out = gridfeas(&["boundary", "--grid", fixture("example1.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let out = gridfeas(&["boundary", "--grid", grid.to_str().unwrap(), "--rays", "0"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn certify_outcomes() {
    let grid = fixture("example1.json");
    let certify = |d: &str| -> CertifyReport {
        serde_json::from_str(&run_ok(&["certify", "--grid", grid.to_str().unwrap(), "--demand", d])).unwrap()
    };
    match certify("1.0") {
        CertifyReport::Certificate { lmi, .. } => {
            assert_eq!(lmi.verdict, LmiVerdictName::Pd);
            assert_eq!(lmi.matrix, vec![vec![6.0, 3.0], vec![3.0, 2.0]]);
        }
        other => panic!("{other:?}"),
    }
    match certify("0.75") {
        CertifyReport::Certificate { lmi, .. } => assert_eq!(lmi.verdict, LmiVerdictName::PsdSingular),
        other => panic!("{other:?}"),
    }
    assert!(matches!(certify("0.5"), CertifyReport::Feasible { .. }));
}

#[test]
fn thread_count_from_environment() {
    let grid = fixture("example2_w2.json");
    let args = ["boundary", "--grid", grid.to_str().unwrap(), "--rays", "32"];
    let serial = Command::new(env!("CARGO_BIN_EXE_gridfeas"))
        .args(args)
        .env("GRIDFEAS_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(serial.status.code(), Some(0));
    assert_eq!(serial.stdout, gridfeas(&args).stdout);

    let bad = Command::new(env!("CARGO_BIN_EXE_gridfeas"))
        .args(args)
        .env("GRIDFEAS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(4));
}
