//! End-to-end tests of the `condfit` binary: exit codes, determinism of
//! emitted files, and the report schema.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_condfit"))
}

fn write_exponential_sample(path: &Path) {
    use rand::Rng;
    let mut rng = condfit::rng::stream_rng(77, condfit::rng::Stream::Dataset, 0);
    let mut csv = String::from("value\n");
    for _ in 0..40 {
        let u: f64 = rng.gen();
        csv.push_str(&format!("{}\n", -(1.0 - u).ln() * 2.0 + 0.01));
    }
    std::fs::write(path, csv).unwrap();
}

#[test]
fn gof_runs_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("sample.csv");
    write_exponential_sample(&input);
    let out1 = dir.path().join("report1.json");
    let out2 = dir.path().join("report2.json");
    for out in [&out1, &out2] {
        let status = bin()
            .args([
                "gof",
                "--family",
                "exponential",
                "--input",
                input.to_str().unwrap(),
                "--bootstrap",
                "200",
                "--conditional",
                "199",
                "--seed",
                "42",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b, "same seed must produce byte-identical reports");

    // minimal schema conformance: all required fields present with the
    // right shapes (the full schema lives in schemas/gof_report.schema.json)
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schemas/gof_report.schema.json")).unwrap();
    for key in schema["required"].as_array().unwrap() {
        assert!(
            !v[key.as_str().unwrap()].is_null(),
            "missing required report field {key}"
        );
    }
    assert_eq!(v["schema_version"], 1);
    assert!(v["p_bootstrap"]["estimate"].as_f64().unwrap() > 0.0);
    assert!(v["p_conditional"]["estimate"].as_f64().unwrap() > 0.0);
}

#[test]
fn worker_count_never_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("sample.csv");
    write_exponential_sample(&input);
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.path().join(format!("report_w{workers}.json"));
        let status = bin()
            .args([
                "--workers",
                workers,
                "gof",
                "--family",
                "exponential",
                "--input",
                input.to_str().unwrap(),
                "--bootstrap",
                "300",
                "--conditional",
                "299",
                "--seed",
                "7",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "--workers must not affect results");
}

#[test]
fn malformed_csv_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "1.0\n2.0\nnot-a-number\n3.0\n").unwrap();
    let out = dir.path().join("report.json");
    let output = bin()
        .args([
            "gof",
            "--family",
            "exponential",
            "--input",
            input.to_str().unwrap(),
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!out.exists(), "no partial output file may be left behind");
    assert!(String::from_utf8_lossy(&output.stderr).contains("parse"));
}

#[test]
fn domain_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("neg.csv");
    std::fs::write(&input, "1.0\n-2.0\n3.0\n").unwrap();
    let output = bin()
        .args([
            "gof",
            "--family",
            "gamma",
            "--input",
            input.to_str().unwrap(),
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn nonconvergence_exits_4() {
    // two equal angles: resultant length 1, the concentration diverges
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("deg.csv");
    std::fs::write(&input, "1.0\n1.0\n").unwrap();
    let output = bin()
        .args([
            "gof",
            "--family",
            "vonmises",
            "--input",
            input.to_str().unwrap(),
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn unhealthy_chain_diagnostics_exit_5_with_report() {
    // three evenly spread angles: zero resultant, so every triple move is
    // accepted and the acceptance-rate check trips (report still written)
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("spread.csv");
    let third = 2.0 * std::f64::consts::PI / 3.0;
    std::fs::write(&input, format!("0.0\n{}\n{}\n", third, 2.0 * third)).unwrap();
    let out = dir.path().join("report.json");
    let output = bin()
        .args([
            "gof",
            "--family",
            "vonmises",
            "--stat",
            "watson",
            "--input",
            input.to_str().unwrap(),
            "--bootstrap",
            "99",
            "--conditional",
            "99",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(5), "{}", String::from_utf8_lossy(&output.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["chain_diagnostics"]["healthy"], false);
}

#[test]
fn missing_input_exits_6() {
    let output = bin()
        .args([
            "gof",
            "--family",
            "exponential",
            "--input",
            "/nonexistent.csv",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(6));
}

#[test]
fn rb_estimate_reports_both_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gamma.csv");
    let mut csv = String::new();
    use rand::Rng;
    let mut rng = condfit::rng::stream_rng(5, condfit::rng::Stream::Dataset, 1);
    for _ in 0..30 {
        let a: f64 = rng.gen::<f64>() + 0.2;
        let b: f64 = rng.gen::<f64>() + 0.2;
        csv.push_str(&format!("{}\n", 2.0 * a * b + 0.1));
    }
    std::fs::write(&input, csv).unwrap();
    let output = bin()
        .args(["rb-estimate", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(v["shape_mle"].as_f64().is_some());
    assert!(v["shape_rao_blackwell"].as_f64().is_some());
}

#[test]
fn reproduce_correlation_writes_pairs_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corr.json");
    let status = bin()
        .args([
            "reproduce-correlation",
            "--n",
            "10",
            "--datasets",
            "12",
            "--bootstrap",
            "120",
            "--conditional",
            "120",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let pairs = dir.path().join("corr.pairs.csv");
    let text = std::fs::read_to_string(&pairs).unwrap();
    assert!(text.starts_with("p_bootstrap,p_conditional\n"));
    assert_eq!(text.lines().count(), 13);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["pearson"].as_f64().unwrap().abs() <= 1.0);
}

#[test]
fn limit_dist_simple_null() {
    let output = bin()
        .args([
            "limit-dist",
            "--stat",
            "watson",
            "--grid",
            "256",
            "--eigenvalues",
            "40",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let eig = v["eigenvalues"].as_array().unwrap();
    assert_eq!(eig.len(), 40);
    // doubled multiplicity of the leading pair
    let l0 = eig[0].as_f64().unwrap();
    let l1 = eig[1].as_f64().unwrap();
    assert!((l0 - l1).abs() / l0 < 0.02);
}

#[test]
fn edgeworth_check_reports_its_gates() {
    let output = bin().args(["edgeworth-check"]).output().unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(v["expansion_within_factor2"], true);
    assert!(v["density_error_ratio"].as_f64().unwrap() <= 0.6);
}

#[test]
fn theorem1_check_single_size() {
    let output = bin()
        .args([
            "theorem1-check",
            "--family",
            "exponential",
            "--theta",
            "1.0",
            "--n-list",
            "25",
            "--bootstrap",
            "1000",
            "--conditional",
            "1000",
            "--seed",
            "4",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert!(v["trend_nonincreasing"].is_null());
}
