use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sia")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sia-exit-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ZERO_CERT: &str = r#"{
  "format": 1,
  "rho": {"c1": 1.0, "c2": 1.0, "b1": 0.0, "b2": 0.0},
  "k": 0.3,
  "multipliers": [[0,0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0,0],
                  [0,0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0,0]],
  "eta": 0.1,
  "geometry": {"l1": 1.0, "l2": 1.0, "d_max": 1.5},
  "bounds": {"u_min": -100.0, "u_max": 100.0},
  "tool_version": "0.1.0",
  "seed": 0
}"#;

#[test]
fn usage_errors_exit_1() {
    let dir = scratch("usage");
    assert_eq!(code(&sia(&["frobnicate"])), 1);
    assert_eq!(code(&sia(&["check"])), 1);
    let bad = write(&dir, "bad.json", r#"{"bogus": true}"#);
    assert_eq!(code(&sia(&["synth", "--config", &bad, "--out", dir.to_str().unwrap()])), 1);
    let broken = write(&dir, "cert.json", "{\"format\": 1,");
    let o = sia(&["adapt", "--certificate", &broken, "--rho", "0.8,0.8,0,0"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));
    let cert = write(&dir, "zero.json", ZERO_CERT);
    assert_eq!(code(&sia(&["adapt", "--certificate", &cert, "--rho", "1,2"])), 1);
    assert_eq!(code(&sia(&["--help"])), 0);
}

#[test]
fn synthesis_failure_exits_2() {
    let dir = scratch("synth");
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{"rho": {"c1": 0.0, "c2": 0.0, "b1": 0.0, "b2": 0.0},
            "synthesis": {"k_grid": [0.3], "restarts": 1,
                          "inner": {"lambda_p": 3e-2, "max_iters": 2000}}}"#,
    );
    let o = sia(&["synth", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.join("certificate.json").exists());
}

#[test]
fn adaptation_failure_exits_3_and_keeps_trace() {
    let dir = scratch("adapt");
    let cert = write(&dir, "zero.json", ZERO_CERT);
    let cfg = write(&dir, "cfg.json", r#"{"dga": {"max_iters": 5}}"#);
    let out = dir.join("out");
    let o = sia(&[
        "adapt", "--config", &cfg, "--certificate", &cert, "--rho", "0.8,0.8,0,0",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,worst_minor_q1"));
    assert!(trace.lines().count() > 1);
    assert!(!out.join("certificate.json").exists());
}

#[test]
fn invalid_certificate_exits_4() {
    let dir = scratch("check");
    let cert = write(&dir, "zero.json", ZERO_CERT);
    let o = sia(&["check", "--certificate", &cert, "--samples", "10"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("NOT psd"));
}

#[test]
fn pipeline_and_unsafe_simulation() {
    let dir = scratch("pipeline");
    let d = dir.to_str().unwrap();
    let synth = sia(&["synth", "--seed", "3", "--out", d]);
    assert_eq!(code(&synth), 0, "{}", String::from_utf8_lossy(&synth.stderr));
    let cert = dir.join("certificate.json");
    let cert = cert.to_str().unwrap();
    for q in ["q1.csv", "q2.csv", "q3.csv", "q4.csv"] {
        let text = std::fs::read_to_string(dir.join(q)).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().all(|l| l.split(',').count() == 9));
    }
    assert_eq!(code(&sia(&["check", "--certificate", cert])), 0);

    let same = dir.join("same");
    let o = sia(&["adapt", "--certificate", cert, "--rho", "1,1,0,0", "--out", same.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let adapted = std::fs::read_to_string(same.join("certificate.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&adapted).unwrap();
    assert_eq!(v["provenance"]["iterations"], 0);

    let sim = dir.join("sim");
    let o = sia(&["simulate", "--certificate", cert, "--out", sim.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("completed"));

    // a zero gain index with a goal behind the wall cannot brake in time
    let zero = write(&dir, "zero.json", ZERO_CERT.replace("\"k\": 0.3", "\"k\": 0.0").as_str());
    let cfg = write(
        &dir,
        "wall.json",
        r#"{"scenario": {"goals": [{"x": 1.6, "y": 0.9}],
                         "rho_schedule": [{"c1": 1.0, "c2": 1.0, "b1": 0.0, "b2": 0.0}]}}"#,
    );
    let crash = dir.join("crash");
    let o = sia(&[
        "simulate", "--config", &cfg, "--certificate", &zero, "--no-adapt",
        "--out", crash.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(crash.join("trajectory.csv").exists() && crash.join("path.csv").exists());
}
