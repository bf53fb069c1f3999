use std::path::PathBuf;
use std::process::{Command, Output};

use orthocal::io::{CalibrationReport, MeasurementFile};

fn orthocal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthocal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(n: usize) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join(format!("fixtures/experiment{n}.json"))
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn calibrate_fixture_and_write_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = orthocal(&[
        "calibrate",
        &fixture(2),
        "--method",
        "nonlinear6",
        "--out",
        out.to_str().unwrap(),
        "--verbose",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(written, stdout(&o));
    let report = CalibrationReport::parse(&written).unwrap();
    assert!((report.offsets.z + 1.76).abs() < 0.02);
    assert!(report.input_digest.starts_with("sha256:"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("residual rms"));
}

#[test]
fn calibrate_is_silent_on_stderr_without_verbose() {
    let o = orthocal(&["calibrate", &fixture(3), "--method", "linear6"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stderr.is_empty());
}

#[test]
fn missing_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(fixture(2)).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["values"].as_object_mut().unwrap().remove("dz_y");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = orthocal(&["calibrate", path.to_str().unwrap(), "--method", "linear6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dz_y"));
}

#[test]
fn wrong_method_for_data_is_an_input_error() {
    let o = orthocal(&["calibrate", &fixture(1), "--method", "closed-form"]);
    assert_eq!(o.status.code(), Some(1));
    let o = orthocal(&["calibrate", &fixture(1), "--method", "nonlinear12"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreadable_input_is_an_input_error() {
    let o = orthocal(&["calibrate", "/nonexistent/file.json", "--method", "linear6"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn divergent_fit_is_a_numerical_failure() {
    // deviations far beyond anything offsets within the model bound can explain
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wild.json");
    let text = r#"{"schema_version": 1, "units": "mm", "method": "double-reduced",
        "values": {"dx_y": 400.0, "dx_z": -400.0, "dy_x": 400.0, "dy_z": -400.0, "dz_x": 400.0, "dz_y": -400.0}}"#;
    std::fs::write(&path, text).unwrap();
    let o = orthocal(&[
        "calibrate",
        path.to_str().unwrap(),
        "--method",
        "nonlinear6",
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn simulate_then_calibrate_recovers_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.json");
    let o = orthocal(&[
        "simulate",
        "--offsets",
        "0.4,-0.3,0.2",
        "--sigma",
        "0",
        "--method",
        "double-full",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = orthocal(&[
        "calibrate",
        path.to_str().unwrap(),
        "--method",
        "nonlinear12",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report = CalibrationReport::parse(&stdout(&o)).unwrap();
    let got = report.offsets.to_vector();
    assert!((got - nalgebra::Vector3::new(0.4, -0.3, 0.2)).abs().max() < 1e-6);
}

#[test]
fn simulate_is_byte_reproducible() {
    let args = [
        "simulate",
        "--offsets",
        "1,-1,0.5",
        "--sigma",
        "0.01",
        "--seed",
        "77",
        "--repetitions",
        "3",
        "--quantize",
        "0.01",
    ];
    let a = orthocal(&args);
    let b = orthocal(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let file = MeasurementFile::parse(&stdout(&a)).unwrap();
    assert_eq!(file.repetitions.len(), 6);
    assert!(file.simulation.is_some());
}

#[test]
fn accuracy_reports_both_equation_sets() {
    let o = orthocal(&["accuracy", "--sigma", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["six"]["sigma_rho"].as_f64().unwrap() - 1.98).abs() < 0.01);
    assert!((v["twelve"]["sigma_rho"].as_f64().unwrap() - 2.06).abs() < 0.01);
    assert_eq!(
        orthocal(&["accuracy", "--sigma", "-1"]).status.code(),
        Some(1)
    );
}

#[test]
fn small_montecarlo_run() {
    let args = [
        "montecarlo",
        "--offsets",
        "0.1,0.1,0.1",
        "--runs",
        "200",
        "--replications",
        "2",
        "--method",
        "nonlinear6",
        "--seed",
        "4",
    ];
    let o = orthocal(&args);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["replications"].as_array().unwrap().len(), 2);
    assert_eq!(orthocal(&args).stdout, o.stdout);
}

#[test]
fn sensitivity_with_custom_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geom.json");
    std::fs::write(
        &path,
        r#"{"leg_length": 300.0, "rho_min": -70.0, "rho_max": 70.0, "tool_offset": 31.0, "parallelogram_width": 80.0}"#,
    )
    .unwrap();
    let o = orthocal(&[
        "sensitivity",
        "--offsets",
        "1,1,1",
        "--geometry",
        path.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &rows[6]["values"];
    let (hi, lo) = (row[0][1].as_f64().unwrap(), row[1][1].as_f64().unwrap());
    assert!((hi - 1.0 + lo - 1.0).abs() < 1e-12);
}

#[test]
fn bad_arguments_exit_with_input_error() {
    assert_eq!(orthocal(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        orthocal(&["simulate", "--offsets", "1,2"]).status.code(),
        Some(1)
    );
    assert_eq!(orthocal(&["--help"]).status.code(), Some(0));
}
