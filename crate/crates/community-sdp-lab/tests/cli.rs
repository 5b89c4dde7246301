use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_community-sdp-lab")).args(args).output().expect("spawn binary")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn clique_file(dir: &Path) -> String {
    // Noiseless 6-node instance with the community {0, 1, 2}.
    let mut text = String::from("%%MatrixMarket matrix coordinate real symmetric\n6 6 3\n");
    text.push_str("2 1 1\n3 1 1\n3 2 1\n");
    let path = dir.join("L.mtx");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_noiseless_clique() {
    let dir = tempfile::tempdir().unwrap();
    let l = clique_file(dir.path());
    let v = stdout_json(&lab(&["solve", "--in", &l, "--k", "3", "--truth", "0,1,2"]));
    assert_eq!(v["status"], "Optimal");
    assert!((v["objective"].as_f64().unwrap() - 6.0).abs() < 1e-6, "{v}");
    assert_eq!(v["recovery"]["success"], true, "{v}");
}

#[test]
fn vm_at_one_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let m = clique_file(dir.path());
    let v = stdout_json(&lab(&["vm", "--in", &m, "--a", "1,6"]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["value"].as_f64().unwrap().abs() < 1e-9);
    // V_m(m) = <M, J> / m = 6 / 6.
    assert!((rows[1]["value"].as_f64().unwrap() - 1.0).abs() < 1e-6, "{v}");
}

#[test]
fn generate_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = lab(&["generate", "--kind", "gaussian", "--n", "40", "--k", "8", "--mu", "6", "--seed", "3", "--out-dir", d]);
    assert!(out.status.success());
    let a = dir.path().join("A.mtx");
    let inst = dir.path().join("instance.json");
    assert!(a.exists() && inst.exists());
    let cert_dir = dir.path().join("cert");
    let v = stdout_json(&lab(&[
        "certify",
        "--in",
        a.to_str().unwrap(),
        "--instance",
        inst.to_str().unwrap(),
        "--out-dir",
        cert_dir.to_str().unwrap(),
    ]));
    assert_eq!(v["kkt"]["accepted"], true, "{v}");
    for f in ["cert.json", "D.mtx", "B.mtx", "S.mtx"] {
        assert!(cert_dir.join(f).exists(), "{f} missing");
    }
}

#[test]
fn report_matches_hand_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    fs::write(
        &csv,
        "# community-sdp-lab v1\n\
         cell,axis:k,trial,sdp_success,mle_success\n\
         0,4,0,true,true\n\
         0,4,1,false,true\n\
         1,8,0,true,\n",
    )
    .unwrap();
    let out = lab(&["report", "--in", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let mut rdr = csv::ReaderBuilder::new().from_reader(out.stdout.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["cell", "axis:k", "column", "trials", "successes", "rate", "wilson_lo", "wilson_hi"]);
    let rows: Vec<Vec<String>> = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    let key: Vec<(&str, &str, &str, &str, f64)> = rows
        .iter()
        .map(|r| (r[0].as_str(), r[1].as_str(), r[2].as_str(), r[3].as_str(), r[5].parse().unwrap()))
        .collect();
    assert_eq!(
        key,
        vec![
            ("0", "4", "sdp_success", "2", 0.5),
            ("0", "4", "mle_success", "2", 1.0),
            ("1", "8", "sdp_success", "1", 1.0),
        ]
    );
}

#[test]
fn sweep_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"model": {"kind": "bernoulli", "n": 12, "K": 4, "p": 1.0, "q": 0.0},
            "trials": 1, "algorithms": ["sdp", "mle"], "seed0": 5}"#,
    )
    .unwrap();
    stdout_json(&lab(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# community-sdp-lab v1\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn usage_error_exits_two() {
    let out = lab(&["solve", "--in", "x.mtx"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
    let out = lab(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].is_string());
}

#[test]
fn runtime_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.mtx");
    let out = lab(&["solve", "--in", missing.to_str().unwrap(), "--k", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "runtime");
}
