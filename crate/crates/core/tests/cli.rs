use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hessot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessot")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, contents).unwrap();
    p
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

const MU: &str = r#"{"dim": 2, "atoms": [{"x": [0.0, 0.0], "w": 1.0}]}"#;
const NU: &str = r#"{"dim": 2, "atoms": [{"x": [1.0, 0.0], "w": 0.5}, {"x": [-1.0, 0.0], "w": 0.5}]}"#;

#[test]
fn solve_verify_render() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let plan = dir.path().join("plan.csv");
    let jets = dir.path().join("jets.json");
    let out = hessot(&[
        "solve",
        "--mu",
        mu.to_str().unwrap(),
        "--nu",
        nu.to_str().unwrap(),
        "--out",
        plan.to_str().unwrap(),
        "--jets",
        jets.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert!((s["value"].as_f64().unwrap() - 0.5).abs() < 1e-7, "{s}");
    assert!(dir.path().join("plan.csv.manifest.json").exists());

    let out = hessot(&[
        "verify",
        "--mu",
        mu.to_str().unwrap(),
        "--nu",
        nu.to_str().unwrap(),
        "--plan",
        plan.to_str().unwrap(),
        "--jets",
        jets.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    let svg = dir.path().join("sigma.svg");
    let out = hessot(&["render", "--sigma", plan.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn verify_rejects_a_perturbed_plan() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let plan = write(
        dir.path(),
        "plan.csv",
        "i,j,x_0,x_1,y_0,y_1,z_0,z_1,mass\n0,0,0,0,1,0,1,0,0.6\n0,1,0,0,-1,0,-1,0,0.4\n",
    );
    let out = hessot(&["verify", "--mu", mu.to_str().unwrap(), "--nu", nu.to_str().unwrap(), "--plan", plan.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let off = write(dir.path(), "off.json", r#"{"dim": 2, "atoms": [{"x": [3.0, 0.0], "w": 1.0}]}"#);
    let nu = write(dir.path(), "nu.json", NU);
    assert_eq!(hessot(&["solve", "--mu", mu.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(hessot(&["solve", "--mu", mu.to_str().unwrap(), "--nu", off.to_str().unwrap()]).status.code(), Some(1));
    let starved = hessot(&["solve", "--mu", mu.to_str().unwrap(), "--nu", nu.to_str().unwrap(), "--max-iters", "2"]);
    assert_eq!(starved.status.code(), Some(2));
    let bad = write(dir.path(), "bad.json", "{\"dim\": 2, \"atoms\": [{\"x\": [0.0], \"w\": 1.0}]}");
    assert_eq!(hessot(&["solve", "--mu", bad.to_str().unwrap(), "--nu", nu.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn oracles() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let out = hessot(&["oracle", "ordered", "--mu", mu.to_str().unwrap(), "--nu", nu.to_str().unwrap()]);
    assert!((summary(&out)["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let out = hessot(&["oracle", "gaussian", "--m", "1,0,0,1", "--n", "2,0,0,0.5"]);
    assert!((summary(&out)["value"].as_f64().unwrap() - 0.75).abs() < 1e-12);

    let pts = write(dir.path(), "pts.json", r#"{"x1": [1.0, 0.0], "x2": [-1.0, 0.0], "y1": [0.0, 1.0], "y2": [0.0, -1.0]}"#);
    let out = hessot(&["oracle", "two-point", "--points", pts.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let load = write(dir.path(), "load.json", r#"{"x": [0.0, 0.0], "y": [2.0, 0.0], "z": [1.0, 1.0]}"#);
    let out = hessot(&["oracle", "basic", "--load", load.to_str().unwrap()]);
    assert!(out.status.success());

    let out = hessot(&["oracle", "grid", "--mu", mu.to_str().unwrap(), "--nu", nu.to_str().unwrap(), "--grid-h", "0.25"]);
    assert!((summary(&out)["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    let out = hessot(&["oracle", "grid", "--mu", mu.to_str().unwrap(), "--nu", nu.to_str().unwrap(), "--grid-h", "0.001", "--max-atoms", "100"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_order_and_guard() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let out = hessot(&["check-order", "--rho", nu.to_str().unwrap(), "--mu", mu.to_str().unwrap()]);
    assert_eq!(summary(&out)["result"], "Yes");
    let out = hessot(&["check-order", "--rho", mu.to_str().unwrap(), "--mu", nu.to_str().unwrap()]);
    assert_eq!(summary(&out)["result"], "No");
    let out = hessot(&["check-order", "--rho", nu.to_str().unwrap(), "--mu", mu.to_str().unwrap(), "--max-atoms", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn design_and_refine() {
    let dir = tempfile::tempdir().unwrap();
    let plus = write(dir.path(), "plus.json", NU);
    let minus = write(dir.path(), "minus.json", MU);
    let svg = dir.path().join("g.svg");
    let out = hessot(&["design", "--plus", plus.to_str().unwrap(), "--minus", minus.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((summary(&out)["energy"].as_f64().unwrap() - 0.5).abs() < 1e-7);
    assert!(svg.exists());

    let out = hessot(&["refine", "--levels", "2,3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
