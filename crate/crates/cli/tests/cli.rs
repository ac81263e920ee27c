use std::path::Path;
use std::process::{Command, Output};

use truncvol::arith::q;
use truncvol_cli::RunReport;

fn truncvol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truncvol")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(out: &Output) -> RunReport {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("single JSON report")
}

const TRI: &str = r#"{"n":2,"constraints":[{"b":"1","linear":["1","1"]}]}"#;

#[test]
fn triangle_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let tri = write(dir.path(), "tri.json", TRI);
    let r = report(&truncvol(&["estimate", "--instance", &tri, "--epsilon", "1/4"]));
    let e = r.estimate_value();
    assert!(e >= q("1/2") && e <= q("5/8"), "{e}");
    assert_eq!(r.mode, "halfspace");
    assert_eq!(r.epsilon, "1/4");
    assert_eq!(r.delta, "1/36");
}

#[test]
fn empty_instance() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "empty.json", r#"{"n":2,"constraints":[{"b":"-1","linear":["1","1"]}]}"#);
    let r = report(&truncvol(&["estimate", "--instance", &p, "--epsilon", "1/2"]));
    assert_eq!(r.estimate, "0/1");
    assert_eq!(r.warnings, vec!["empty".to_string()]);
    let p = write(dir.path(), "empty2.json", r#"{"n":1,"constraints":[{"b":"-1","fns":[{"poly":[["1",2]]}]}]}"#);
    let r = report(&truncvol(&["estimate", "--instance", &p, "--epsilon", "1/2", "--mode", "convex"]));
    assert_eq!(r.estimate, "0/1");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"n":1,"constraints":[{"b":"1","fns":[{"poly":[["-1",2]]}]}]}"#);
    let out = truncvol(&["estimate", "--instance", &bad, "--epsilon", "1/2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let garbled = write(dir.path(), "garbled.json", "{\"n\": 1,\n  \"constraints\": [");
    let out = truncvol(&["estimate", "--instance", &garbled, "--epsilon", "1/2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let tri = write(dir.path(), "tri.json", TRI);
    let out = truncvol(&["estimate", "--instance", &tri, "--epsilon", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = truncvol(&["estimate", "--instance", &tri, "--epsilon", "1/2", "--mode", "convex", "--max-labels", "10"]);
    assert_eq!(out.status.code(), Some(3));
    let out = truncvol(&["estimate", "--instance", &tri, "--epsilon", "1/2", "--max-width", "3"]);
    assert_eq!(out.status.code(), Some(3));

    let missing = dir.path().join("missing.json");
    let out = truncvol(&["estimate", "--instance", missing.to_str().unwrap(), "--epsilon", "1/2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_round_trip_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "multi.json",
        r#"{"n":2,"constraints":[{"b":"1","linear":["1","1"]},{"b":"1","fns":[{"poly":[["1",2]]},{"poly":[["1",2]]}]}]}"#,
    );
    let args = ["estimate", "--instance", &p, "--epsilon", "1/2"];
    let a = report(&truncvol(&args));
    let b = report(&truncvol(&[&args[..], &["--threads", "1"]].concat()));
    assert_eq!(a.mode, "multi-convex");
    let strip = |mut r: RunReport| {
        r.elapsed_ms = 0;
        r
    };
    assert_eq!(strip(a.clone()), strip(b));
    let text = a.to_json();
    assert!(!text.contains('\n'));
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, a);
    let _ = back.estimate_value();
}

#[test]
fn debug_dump() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "sq.json", r#"{"n":1,"constraints":[{"b":"1/4","fns":[{"poly":[["1",2]]}]}]}"#);
    let dump = dir.path().join("robp.txt");
    report(&truncvol(&["estimate", "--instance", &p, "--epsilon", "1/2", "--emit-debug-robp", dump.to_str().unwrap()]));
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("layer 0: [0/1:"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn selftest_passes() {
    let out = truncvol(&["selftest", "--budget", "1e6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
}
