use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diracgl::glcore::closed_form_remove_zero;
use diracgl::model::{ModelEigenfunction, BoundaryCondition, VectorFunction};
use diracgl::quadrature::integrate;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diracgl")).args(args).output().unwrap()
}

fn plan(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn rows(text: &str) -> (String, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn spectrum_rows() {
    let (h, r) = rows(&stdout(&run(&["spectrum", "--boundary", "alpha0", "--k-min", "-1", "--k-max", "1"])));
    assert_eq!(h, "k,lambda,norming");
    let sp = PI.sqrt();
    let expected = [[-1.0, -2.0, 2.0 * sp], [0.0, 0.0, sp / 2.0], [1.0, 2.0, 2.0 * sp]];
    assert_eq!(r.len(), 3);
    for (row, e) in r.iter().zip(expected) {
        for j in 0..3 {
            assert!((row[j] - e[j]).abs() < 1e-14, "{row:?}");
        }
    }
    let (_, r) = rows(&stdout(&run(&["spectrum", "--k-min", "0", "--k-max", "0"])));
    assert_eq!(r, vec![vec![0.0, 0.0, sp / 2.0]]);
}

#[test]
fn half_pi_norming_by_quadrature() {
    let (_, r) = rows(&stdout(&run(&["spectrum", "--boundary", "alphaPiOver2", "--k-min", "0", "--k-max", "0"])));
    assert!((r[0][1] - 2f64.sqrt()).abs() < 1e-15);
    let f = ModelEigenfunction::new(0, BoundaryCondition::AlphaHalfPi).unwrap();
    let quad = integrate(
        |x| {
            let v = f.eval(x);
            v[0] * v[0] + v[1] * v[1]
        },
        0.0,
        14.0,
        1e-13,
    )
    .unwrap();
    assert!((r[0][2] - quad).abs() < 1e-9 * quad);
}

#[test]
fn spectrum_bad_arguments() {
    assert_eq!(run(&["spectrum", "--k-min", "3", "--k-max", "1"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--k-min", "x", "--k-max", "1"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--boundary", "alphaPi", "--k-min", "0", "--k-max", "1"]).status.code(), Some(2));
}

#[test]
fn perturb_potentials() {
    let dir = TempDir::new().unwrap();
    let empty = plan(&dir, "e.json", r#"{"grid":{"x_max":4,"step":0.0625}}"#);
    let (h, r) = rows(&stdout(&run(&["perturb", &empty])));
    assert_eq!(h, "x,p,q");
    assert_eq!(r.len(), 65);
    for row in &r {
        assert_eq!(row[1], 0.0);
        assert_eq!(row[2], row[0]);
    }
    let remove0 = plan(&dir, "r.json", r#"{"remove":[0]}"#);
    let (_, r) = rows(&stdout(&run(&["perturb", &remove0, "--grid-max", "8", "--grid-step", "0.03125"])));
    assert_eq!(r.last().unwrap()[0], 8.0);
    for row in &r {
        assert!((row[2] - closed_form_remove_zero(row[0]).1).abs() < 1e-9, "x={}", row[0]);
    }
}

#[test]
fn perturb_exports_eigenfunctions_and_echo() {
    let dir = TempDir::new().unwrap();
    let add = plan(&dir, "a.json", r#"{"add":[{"mu":1.5,"c":2.0}]}"#);
    let out = path(&dir, "pot.csv");
    let echo = path(&dir, "echo.json");
    let o = run(&["perturb", &add, "--out", &s(&out), "--eigenfunction", "1.5", "--eigenfunction", "-1", "--echo", &s(&echo)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, r) = rows(&std::fs::read_to_string(path(&dir, "pot_eig_1.5.csv")).unwrap());
    assert_eq!(h, "x,y1,y2");
    // composite Simpson on the exported samples
    let h_step = r[1][0] - r[0][0];
    let f: Vec<f64> = r.iter().map(|row| row[1] * row[1] + row[2] * row[2]).collect();
    let n = f.len() - 1;
    assert_eq!(n % 2, 0);
    let simpson = h_step / 3.0
        * (f[0] + f[n] + (1..n).map(|i| if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] }).sum::<f64>());
    assert!((simpson - 2.0).abs() < 1e-6, "{simpson}");
    assert!(path(&dir, "pot_eig_-1.csv").exists());

    let echo: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(echo).unwrap()).unwrap();
    let spectrum = echo["spectrum"].as_array().unwrap();
    assert_eq!(spectrum.len(), 10);
    assert!(spectrum.iter().any(|e| e["lambda"] == 1.5 && e["norming"] == 2.0));
    assert_eq!(echo["grid"]["x_max"], 12.0);
}

#[test]
fn perturb_errors() {
    let dir = TempDir::new().unwrap();
    let add = plan(&dir, "a.json", r#"{"add":[{"mu":1.5,"c":2.0}]}"#);
    // export without --out
    assert_eq!(run(&["perturb", &add, "--eigenfunction", "1.5"]).status.code(), Some(2));
    let out = s(&path(&dir, "p.csv"));
    let o = run(&["perturb", &add, "--out", &out, "--eigenfunction", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2.5"));
    let removed = plan(&dir, "r.json", r#"{"remove":[1]}"#);
    let o = run(&["perturb", &removed, "--out", &out, "--eigenfunction", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = plan(&dir, "b.json", r#"{"rescale":[{"k":1,"b":-2}]}"#);
    assert_eq!(run(&["perturb", &bad]).status.code(), Some(3));
    let typo = plan(&dir, "t.json", r#"{"remov":[1]}"#);
    assert_eq!(run(&["perturb", &typo]).status.code(), Some(3));
    let same = plan(&dir, "s.json", &format!(r#"{{"rescale":[{{"k":0,"b":{}}}]}}"#, PI.sqrt() / 2.0));
    assert_eq!(run(&["perturb", &same]).status.code(), Some(3));
    // the engine gives up once the equations lose all precision at large x
    let remove0 = plan(&dir, "r0.json", r#"{"remove":[0]}"#);
    let o = run(&["perturb", &remove0, "--grid-max", "40", "--grid-step", "0.0625"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("x = "));
}

#[test]
fn eigenfunction_command() {
    let (h, r) = rows(&stdout(&run(&["eigenfunction", "1", "--grid-max", "2", "--grid-step", "0.5"])));
    assert_eq!(h, "x,y1,y2");
    let f = ModelEigenfunction::new(1, BoundaryCondition::Alpha0).unwrap();
    for row in &r {
        assert_eq!([row[1], row[2]], f.eval(row[0]));
    }
    assert_eq!(run(&["eigenfunction", "1.5"]).status.code(), Some(2));
    let text = stdout(&run(&["--format", "text", "eigenfunction", "-2", "--grid-max", "1", "--grid-step", "0.5"]));
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().next().unwrap().split_whitespace().eq(["x", "y1", "y2"]));
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let remove0 = plan(&dir, "r.json", r#"{"remove":[0]}"#);
    let report = path(&dir, "report.json");
    let o = run(&["verify", &remove0, "--out", &s(&report)]);
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS") || l.ends_with("checks passed")));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert!(json["scan"]["detected"].as_array().unwrap().iter().all(|d| d.as_f64().unwrap().abs() > 0.3));

    // a tolerance below the achievable accuracy fails a check
    let o = run(&["verify", &remove0, "--tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed check"));
    assert_eq!(run(&["verify", &remove0, "--tol", "-1"]).status.code(), Some(2));
}

#[test]
fn verify_round_trip_through_potential_file() {
    let dir = TempDir::new().unwrap();
    let p = plan(&dir, "p.json", r#"{"remove":[1],"rescale":[{"k":2,"b":1.0}],"grid":{"x_max":10,"step":0.00390625}}"#);
    let out = s(&path(&dir, "pot.csv"));
    assert!(run(&["perturb", &p, "--out", &out]).status.success());
    assert_eq!(run(&["verify", &p]).status.code(), Some(0));
    assert_eq!(run(&["verify", &p, "--potential", &out]).status.code(), Some(0));
    // the model potential lacks the perturbation
    let model = plan(&dir, "m.json", r#"{"grid":{"x_max":10,"step":0.00390625}}"#);
    let model_out = s(&path(&dir, "model.csv"));
    assert!(run(&["perturb", &model, "--out", &model_out]).status.success());
    assert_eq!(run(&["verify", &p, "--potential", &model_out]).status.code(), Some(1));
}

#[test]
fn scan_command() {
    let o = run(&["scan", "model", "--lo", "0.5", "--hi", "3.5", "--samples", "256"]);
    let (h, curve) = rows(&stdout(&o));
    assert_eq!(h, "lambda,miss");
    assert_eq!(curve.len(), 256);
    assert!(String::from_utf8_lossy(&o.stderr).contains("detected: [1.99999"));

    let dir = TempDir::new().unwrap();
    let curve_path = s(&path(&dir, "curve.csv"));
    let (_, detected) = rows(&stdout(&run(&["scan", "model", "--lo", "0.1", "--hi", "0.4", "--samples", "64", "--out", &curve_path])));
    assert!(detected.is_empty());
    assert_eq!(rows(&std::fs::read_to_string(&curve_path).unwrap()).1.len(), 64);

    let remove1 = plan(&dir, "r.json", r#"{"remove":[1]}"#);
    let (_, detected) = rows(&stdout(&run(&["scan", &remove1, "--lo", "1.5", "--hi", "2.5", "--samples", "256", "--out", &curve_path])));
    assert!(detected.is_empty(), "{detected:?}");

    let (_, detected) = rows(&stdout(&run(&["scan", "model", "--boundary", "alphaPiOver2", "--lo", "1", "--hi", "2", "--out", &curve_path])));
    assert_eq!(detected.len(), 1);
    assert!((detected[0][0] - 2f64.sqrt()).abs() < 1e-4);

    assert_eq!(run(&["scan", "model", "--lo", "2", "--hi", "2"]).status.code(), Some(2));
    assert_eq!(run(&["scan", "model", "--lo", "0", "--hi", "2", "--samples", "4"]).status.code(), Some(2));
}

#[test]
fn csv_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = plan(&dir, "p.json", r#"{"remove":[0,-1],"rescale":[{"k":2,"b":3.0}],"grid":{"x_max":6,"step":0.015625}}"#);
    let a = run(&["perturb", &p]).stdout;
    let b = run(&["perturb", &p]).stdout;
    assert_eq!(a, b);
    assert!(!a.contains(&b'\r'));
}
