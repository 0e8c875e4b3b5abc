use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multicausal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("report written")).expect("report is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn point_masses_in_causal_order_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("w.coupling");
    let out = run(&[
        "precede",
        "--mu",
        s(&fixture("dirac_p.measure")),
        "--nu",
        s(&fixture("dirac_q.measure")),
        "--emit-witness",
        s(&witness),
        "--check-equivalences",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["verdict"], "yes");
    assert_eq!(r["equivalences_consistent"], true);
    let w = report(&witness);
    assert_eq!(w["pairs"].as_array().unwrap().len(), 1);
}

#[test]
fn blocked_matching_exits_three_with_violator() {
    let dir = tempfile::tempdir().unwrap();
    let violator = dir.path().join("v.violator");
    let rep = dir.path().join("report.json");
    let out = run(&[
        "precede",
        "--mu",
        s(&fixture("blocked_mu.measure")),
        "--nu",
        s(&fixture("blocked_nu.measure")),
        "--exact",
        "--emit-violator",
        s(&violator),
        "--report",
        s(&rep),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v = report(&violator);
    assert_eq!(v["violator"]["atoms"], serde_json::json!([0, 1]));
    assert_eq!(v["violator"]["mu_mass"], "1");
    assert_eq!(v["violator"]["nu_future_mass"], "1/2");
    assert_eq!(report(&rep)["verdict"], "no");
}

#[test]
fn oracle_agrees_on_fixtures() {
    let yes = run(&["oracle", "--mu", s(&fixture("dirac_p.measure")), "--nu", s(&fixture("dirac_q.measure"))]);
    assert_eq!(yes.status.code(), Some(0));
    let no = run(&["oracle", "--mu", s(&fixture("blocked_mu.measure")), "--nu", s(&fixture("blocked_nu.measure"))]);
    assert_eq!(no.status.code(), Some(3));
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.measure");
    std::fs::write(&bad, r#"{"params": {"c": 1, "n": 1, "N": 1}, "t": 0, "atoms": [{"x": [[0]], "w": -1}]}"#).unwrap();
    let out = run(&["precede", "--mu", s(&bad), "--nu", s(&fixture("dirac_q.measure"))]);
    assert_eq!(out.status.code(), Some(2));
    let missing = run(&["precede", "--mu", "/nonexistent.measure", "--nu", s(&fixture("dirac_q.measure"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn oversized_joint_grid_exits_four() {
    let out = run(&["evolve", "--grid", "64", "--coarsen", "1", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn curves_round_trip_and_jump() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = dir.path().join("s.curves");
    let out = run(&["curves", "build", "--evo", s(&fixture("split.evolution")), "--out", s(&sigma), "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    let eval = dir.path().join("half.measure");
    let out = run(&["curves", "eval", "--sigma", s(&sigma), "--t", "1.0", "--out", s(&eval), "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    let m = report(&eval);
    assert_eq!(m["t"], 1.0);
    assert_eq!(m["atoms"].as_array().unwrap().len(), 2);

    let out = run(&["curves", "build", "--evo", s(&fixture("jump.evolution")), "--out", s(&sigma)]);
    assert_eq!(out.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["failing_pair"], serde_json::json!([1, 2]));
    let out = run(&["certify", "--evo", s(&fixture("jump.evolution"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    let (mu, nu) = (fixture("blocked_mu.measure"), fixture("blocked_nu.measure"));
    let args = [
        "precede",
        "--mu",
        s(&mu),
        "--nu",
        s(&nu),
        "--check-equivalences",
        "--seed",
        "17",
    ];
    let strip = |o: Output| {
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_s");
        assert_eq!(v["seed"], 17);
        v
    };
    assert_eq!(strip(run(&args)), strip(run(&args)));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 5, "exact": true, "slack": 10.0}"#).unwrap();
    let (mu, nu) = (fixture("blocked_mu.measure"), fixture("blocked_nu.measure"));
    let blocked = ["--mu", s(&mu), "--nu", s(&nu)];
    let mut args = vec!["--config", s(&cfg), "precede"];
    args.extend(blocked);
    let out = run(&args);
    // a slack of 10 relates every pair
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["seed"], 5);
    assert_eq!(r["exact"], true);
    args.extend(["--slack", "0", "--seed", "6"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["seed"], 6);
}

#[test]
fn default_photon_run_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("report.json");
    let csv = dir.path().join("series.csv");
    let out = run(&[
        "evolve",
        "--species",
        "photon",
        "--n-particles",
        "2",
        "--grid",
        "16",
        "--box",
        "16.0",
        "--dt",
        "0.05",
        "--steps",
        "40",
        "--certify",
        "--csv",
        s(&csv),
        "--report",
        s(&rep),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&rep);
    assert!(r["max_speed"].as_f64().unwrap() <= 1.0 + 1e-9);
    assert_eq!(r["verdict"], "yes");
    assert_eq!(r["certification"]["pairs"].as_array().unwrap().len(), 41);
    assert!(r["certification"]["pairs"].as_array().unwrap().iter().all(|p| p["holds"] == true));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 42);
}

#[test]
fn snapshots_on_disk_recertify_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "evolve",
        "--species",
        "fermion",
        "--steps",
        "4",
        "--emit-density",
        s(&out_dir),
        "--certify",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(out_dir.join("density_00004.json").exists());
    assert_eq!(std::fs::read_to_string(out_dir.join("timeseries.csv")).unwrap().lines().count(), 6);
    let again = run(&["certify", "--density", s(&out_dir), "--dt-step", "0.05"]);
    assert_eq!(again.status.code(), Some(0), "{}", String::from_utf8_lossy(&again.stderr));
    let r2: Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(r2["certification"]["pairs"], r["certification"]["pairs"]);
}
