use std::fs;
use std::process::Command;

use qmio::metrics::{parse_metrics, read_history};
use qmio::model_io::load_model;
use qmio_core::transpile::CompiledArtifact;

fn run(bin: &str, args: &[&str]) -> std::process::Output {
    let out = Command::new(bin).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{bin} {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn calib_run_simulate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let calib = env!("CARGO_BIN_EXE_calib");

    run(calib, &["run", "--scope", "weekly", "--out", &p("m1.json"), "--history", &p("h.jsonl"), "--now", "1000"]);
    let m1 = load_model(dir.path().join("m1.json").as_path()).unwrap();
    assert_eq!(m1.version, 2);
    assert_eq!(m1.calibration.t2_timestamp, 1000);
    run(calib, &["run", "--scope", "daily", "--model", &p("m1.json"), "--out", &p("m2.json"), "--now", "2000"]);
    let m2 = load_model(dir.path().join("m2.json").as_path()).unwrap();
    assert_eq!((m2.version, m2.calibration.t2_timestamp), (3, 1000));

    // 2024-01-01 is a Monday
    let out = run(calib, &["simulate", "--days", "14", "--start", "1704067200", "--history", &p("cal.jsonl")]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("10 daily, 2 weekly"), "{text}");

    let history = read_history(fs::read(p("cal.jsonl")).unwrap().as_slice()).unwrap();
    run(calib, &["export", "--history", &p("cal.jsonl"), "--out", &p("all.csv")]);
    let parsed = parse_metrics(fs::File::open(p("all.csv")).unwrap()).unwrap();
    assert_eq!(parsed, history.iter().map(|s| s.snapshot()).collect::<Vec<_>>());

    run(calib, &["export", "--history", &p("cal.jsonl"), "--from", "0", "--to", "10", "--out", &p("none.csv")]);
    assert_eq!(fs::read_to_string(p("none.csv")).unwrap(), "timestamp,metric,target,value\n");
}

#[test]
fn compile_writes_a_loadable_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("ansatz.qasm");
    fs::write(&src, "// @param theta\nqreg q[1];\ncreg c[1];\nu(theta,0,0) q[0];\nmeasure q[0] -> c[0];\n").unwrap();
    let out = dir.path().join("ansatz.art");
    run(env!("CARGO_BIN_EXE_compile"), &[src.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let a = CompiledArtifact::from_text(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(a.parameter_names, ["theta"]);
    assert!(a.verify_checksum());

    fs::write(&src, "qreg q[1];\nfoo q[0];\n").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_compile")).arg(&src).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("2:"));
}
