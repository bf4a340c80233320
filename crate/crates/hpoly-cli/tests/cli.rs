use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hpoly(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpoly"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn schema() -> jsonschema::Validator {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/manifest.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let out = Command::new(env!("CARGO_BIN_EXE_hpoly")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let out = hpoly(d.path(), &["bounds", "--kk", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bounds_for_k2() {
    let d = tempfile::tempdir().unwrap();
    let out = hpoly(d.path(), &["bounds", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&d.path().join("bounds.json"));
    assert!((v["upper_bound"].as_f64().unwrap() - 3.1046).abs() < 1e-4);
    assert_eq!(v["n"], 24);
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, v);
}

#[test]
fn cut_volume_for_delta_one() {
    let d = tempfile::tempdir().unwrap();
    let out = hpoly(d.path(), &["volumes", "--delta", "1", "--samples", "1000000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&d.path().join("volumes.json"));
    let row = &v["volumes"][0];
    assert_eq!(row["closed_form"].as_f64().unwrap(), 2.0 * std::f64::consts::PI / 3.0);
    assert_eq!(row["within_3sigma"], true);
}

#[test]
fn invalid_parameter_exits_with_2() {
    let d = tempfile::tempdir().unwrap();
    let out = hpoly(d.path(), &["bounds", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let m = read_json(&d.path().join("manifest.json"));
    assert_eq!(m["status"], "error");
    assert!(schema().is_valid(&m));
}

#[test]
fn numeric_failure_exits_with_1() {
    let d = tempfile::tempdir().unwrap();
    // x₁² − 1 is negative along the whole x₂ axis, so a ray never exits
    let rho = d.path().join("rho.json");
    fs::write(&rho, r#"{"terms":[{"coeff":1.0,"powers":[2,0,0,0]},{"coeff":-1.0,"powers":[0,0,0,0]}]}"#).unwrap();
    let out = hpoly(
        d.path(),
        &["fefferman", "custom", "--file", rho.to_str().unwrap(), "--center", "0,0,0,0", "--resolution", "4"],
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifests_validate_against_schema() {
    let v = schema();
    let cases: &[&[&str]] = &[
        &["bounds", "--k", "3"],
        &["volumes", "--rad", "1", "--samples", "100000"],
        &["tile", "--k", "2", "--samples", "100000", "--format", "csv"],
        &["diagram", "--k", "1", "--pixels", "40", "--samples", "100000"],
        &["fefferman", "ball", "--resolution", "12"],
        &["darboux", "--points", "3"],
        &["demo", "lemniscate", "--n", "4,8", "--radial", "200", "--angular", "400", "--svg"],
        &["demo", "bidisc", "--m", "1,2", "--samples", "100000", "--format", "csv"],
    ];
    for args in cases {
        let d = tempfile::tempdir().unwrap();
        let out = hpoly(d.path(), args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let m = read_json(&d.path().join("manifest.json"));
        let errors: Vec<String> = v.iter_errors(&m).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
        for o in m["outputs"].as_array().unwrap() {
            assert!(d.path().join(o["path"].as_str().unwrap()).is_file());
        }
    }
}

#[test]
fn csv_floats_use_seventeen_digits() {
    let d = tempfile::tempdir().unwrap();
    let out = hpoly(d.path(), &["bounds", "--k", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(d.path().join("bounds.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "2");
    assert_eq!(row[2], format!("{:.16e}", row[2].parse::<f64>().unwrap()));
    assert!(row[2].starts_with("3.1045588330612"));
}

#[test]
fn darboux_reports_contact_matrix() {
    let d = tempfile::tempdir().unwrap();
    let out = hpoly(d.path(), &["darboux"]);
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&d.path().join("darboux.json"));
    let j = &v["contact"]["jacobian_at_origin"];
    let want = [[1.0, 0.0, 0.0], [0.0, 1.0, -0.5], [0.0, 0.0, 1.0]];
    for i in 0..3 {
        for k in 0..3 {
            assert!((j[i][k].as_f64().unwrap() - want[i][k]).abs() < 1e-6);
        }
    }
    assert_eq!(v["identity"]["within_tolerance"], true);
}
