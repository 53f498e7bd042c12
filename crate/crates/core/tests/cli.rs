use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(sub: &str, dir: &Path, config: &str) -> Output {
    let cfg = dir.join(format!("{sub}.json"));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_prclab"))
        .args([sub, "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn radial_orbit_header() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        "orbit",
        dir.path(),
        r#"{"schema": "prclab/1", "model": {"kind": "radial_clock", "omega0": 6.283185307179586, "kappa": 1.0},
            "orbit": {"segments": 64, "scheme": "multiple_shooting"}}"#,
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let h = json(&dir.path().join("out/orbit.json"));
    assert!((h["omega"].as_f64().unwrap() - 2.0 * PI).abs() <= 1e-6 * 2.0 * PI);
    let csv = fs::read_to_string(dir.path().join("out/orbit.csv")).unwrap();
    assert!(csv.starts_with("theta,x_1,x_2\n"));
    assert_eq!(csv.lines().count(), 66);
    assert!(!csv.contains('\r'));
}

#[test]
fn fixed_point_goodwin_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        "orbit",
        dir.path(),
        r#"{"schema": "prclab/1", "model": {"kind": "goodwin", "K": 1.0, "tau": 1.0}, "orbit": {"segments": 32}}"#,
    );
    assert_eq!(r.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["error"], "no_cycle");
    assert!(err["message"].as_str().unwrap().contains("no cycle detected"));
    assert!(!dir.path().join("out/orbit.csv").exists());
}

#[test]
fn prc_with_zero_amplitude_column() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        "prc",
        dir.path(),
        r#"{"schema": "prclab/1", "model": {"kind": "radial_clock", "omega0": 6.283185307179586, "kappa": 1.0},
            "orbit": {"segments": 32, "scheme": "multiple_shooting"}, "prc": {"direct": {"amplitudes": [0.0, 0.001]}}}"#,
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("out/prc.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().len(), 4);
    for rec in rd.records() {
        let rec = rec.unwrap();
        let theta: f64 = rec[0].parse().unwrap();
        let q: f64 = rec[1].parse().unwrap();
        assert!((q + theta.sin()).abs() < 1e-5);
        assert_eq!(rec[2].parse::<f64>().unwrap(), 0.0);
    }
    let s = json(&dir.path().join("out/prc.json"));
    assert!(s["direct"][1]["relative_sup_error"].as_f64().unwrap() < 1e-2);
}

#[test]
fn classify_and_dist_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("theta,q\n");
    for j in 0..64 {
        let t = 2.0 * PI * j as f64 / 64.0;
        text += &format!("{t:.16e},{:.16e}\n", 1.0 - t.cos());
    }
    fs::write(dir.path().join("q.csv"), text).unwrap();
    let cfg = r#"{"schema": "prclab/1", "classify": {"prc_file": "q.csv"}, "dist": {"files": ["q.csv", "q.csv"], "spaces": ["A"]}}"#;
    assert!(run("classify", dir.path(), cfg).status.success());
    assert_eq!(json(&dir.path().join("out/classify.json"))["label"], "class-q_I");
    assert!(run("dist", dir.path(), cfg).status.success());
    assert_eq!(json(&dir.path().join("out/dist.json"))["distances"][0]["distance"], 0.0);
}

#[test]
fn identify_trace_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        "identify",
        dir.path(),
        r#"{"schema": "prclab/1", "model": {"kind": "goodwin", "K": 3.0, "tau": 1.0},
            "identify": {"target": {"lambda": [3.0, 1.0]}, "starts": [[3.3, 1.05]],
                         "options": {"max_iter": 40, "orbit": {"segments": 64}}}}"#,
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("out/trace.csv")).unwrap();
    let costs: Vec<f64> = rd.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    let s = json(&dir.path().join("out/identify.json"));
    assert!(s["runs"][0]["distance"].as_f64().unwrap() < 1e-3);
}

#[test]
fn bad_invocations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let r = run("orbit", dir.path(), "{not json");
    assert_eq!(r.status.code(), Some(1));
    let r = run("orbit", dir.path(), r#"{"schema": "prclab/1", "model": {"kind": "pendulum"}}"#);
    assert_eq!(r.status.code(), Some(1));
    let r = run("dist", dir.path(), r#"{"schema": "prclab/1"}"#);
    assert_eq!(r.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_prclab")).arg("orbit").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
