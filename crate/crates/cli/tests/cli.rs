use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn tsdsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsdsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
        - 1
}

#[test]
fn default_config_is_printed_as_json() {
    let dir = tempdir().unwrap();
    let o = tsdsim(dir.path(), &["--print-default-config"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["structure", "tsd", "sweep", "numerics"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["tsd"]["wheels"].as_array().unwrap().len(), 10);
    assert_eq!(v["tsd"]["contact_pressure_mpa"], 0.92);
}

#[test]
fn respond_writes_profiles_and_charts() {
    let dir = tempdir().unwrap();
    let o = tsdsim(dir.path(), &["respond", "--modulus", "100", "--svg", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = dir.path().join("r");
    assert_eq!(data_rows(&r.join("profile_E100.csv")), 401);
    assert_eq!(data_rows(&r.join("slope_E100.csv")), 401);
    let d = std::fs::read_to_string(r.join("deflection_E100.svg")).unwrap();
    let s = std::fs::read_to_string(r.join("slope_E100.svg")).unwrap();
    assert!(d.contains("deflection (µm)"));
    assert!(s.contains("slope (µm/m)"));
}

#[test]
fn negative_modulus_is_an_input_error() {
    let dir = tempdir().unwrap();
    let o = tsdsim(dir.path(), &["respond", "--modulus", "-5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("positivity"), "{}", stderr(&o));
}

#[test]
fn generate_is_deterministic_and_invertible() {
    let dir = tempdir().unwrap();
    for out in ["a", "b"] {
        let o = tsdsim(dir.path(), &["generate", "--sweep", "100:110:1", "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("11 rows"));
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(data_rows(&a.join("slopes.csv")), 11);
    for f in ["slopes.csv", "deflections.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let o = tsdsim(dir.path(), &["invert", "a/slopes.csv", "--out", "inv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let results = std::fs::read_to_string(dir.path().join("inv/results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("id,MR_MPa,residual,method,at_bound"));
    for (i, line) in lines.enumerate() {
        let mr: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((mr - (100 + i) as f64).abs() < 0.01, "{line}");
    }

    let o = tsdsim(
        dir.path(),
        &["invert", "a/slopes.csv", "--method", "lookup", "--database", "b/slopes.csv", "--out", "look"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn non_monotone_sweep_exits_numerical_unless_allowed() {
    let dir = tempdir().unwrap();
    let o = tsdsim(dir.path(), &["generate", "--sweep", "60:100:20", "--out", "n"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("Sn1"), "{}", stderr(&o));
    let db = std::fs::read_to_string(dir.path().join("n/slopes.csv")).unwrap();
    assert!(db.contains("# non_monotone=Sn1@"));
    let o = tsdsim(dir.path(), &["generate", "--sweep", "60:100:20", "--out", "n", "--allow-non-monotone"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn bad_readings_files_are_input_errors() {
    let dir = tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    std::fs::write(dir.path().join("bad.csv"), "id,Sn1,Sn2,Sn3,Sn4,Sn5,Sn6,Sn7,Sn9\nx,1,2,3,4,5,6,7,8\n").unwrap();
    let o = tsdsim(dir.path(), &["invert", "empty.csv"]);
    assert_eq!(code(&o), 2);
    let o = tsdsim(dir.path(), &["invert", "bad.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Sn9"), "{}", stderr(&o));
}

#[test]
fn validate_suite_and_negative_control() {
    let dir = tempdir().unwrap();
    let o = tsdsim(dir.path(), &["validate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let o = tsdsim(dir.path(), &["validate", "--tol", "1e-12"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS boussinesq"));
    let o = tsdsim(dir.path(), &["validate", "--corrupt-kernel"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"tsd": {"sensor_offsets_m": [0.1, 0.2]}}"#).unwrap();
    let o = tsdsim(dir.path(), &["--config", "c.json", "respond", "--modulus", "100"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sensor"), "{}", stderr(&o));

    std::fs::write(dir.path().join("u.json"), r#"{"numerics": {"tolerence": 1e-8}}"#).unwrap();
    let o = tsdsim(dir.path(), &["--config", "u.json", "validate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("tolerence"), "{}", stderr(&o));

    let o = tsdsim(dir.path(), &["validate", "--tol", "1e-3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("numerics.tolerance"));
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"sweep": {"values_mpa": [120.0, 130.0]}, "output_dir": "cfg-out"}"#,
    )
    .unwrap();
    let o = tsdsim(dir.path(), &["--config", "c.json", "--contact", "radius", "generate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let db = std::fs::read_to_string(dir.path().join("cfg-out/slopes.csv")).unwrap();
    assert!(db.contains("# contact_mode=radius"));
    assert_eq!(data_rows(&dir.path().join("cfg-out/slopes.csv")), 2);
}

#[test]
fn plot_needs_a_source() {
    let dir = tempdir().unwrap();
    let o = tsdsim(dir.path(), &["plot"]);
    assert_eq!(code(&o), 2);
    let o = tsdsim(dir.path(), &["plot", "--modulus", "40", "--out", "p"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("p/slope_E040.svg").exists());
}
