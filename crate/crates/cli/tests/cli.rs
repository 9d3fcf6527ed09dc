use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn isoforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoforge"))
        .args(args)
        .env_remove("ISOFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).to_string();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("error ")).collect();
    assert_eq!(lines.len(), 1, "{text}");
    lines[0].to_string()
}

#[test]
fn bm_distance_of_linf() {
    let r = report(&isoforge(&["bm-distance", "--m", "linf", "--n", "l2"]));
    assert_eq!(r["schema"], 1);
    assert_eq!(r["command"], "bm-distance");
    assert!((num(&r["distance"]) - 2f64.sqrt()).abs() < 1e-3);
}

#[test]
fn uniformize_euclidean_field() {
    let r = report(&isoforge(&["uniformize", "--field", "l2", "--nx", "65"]));
    assert!(num(&r["residual_mu_max"]) < 1e-6);
    assert!((num(&r["dilatations"]["k_outer"]) - 1.0).abs() < 1e-6);
    assert!((num(&r["dilatations"]["k_inner"]) - 1.0).abs() < 1e-6);
}

#[test]
fn verify_annulus_matches_bm_distance() {
    let v = report(&isoforge(&["verify-annulus", "--p", "1.5", "--r", "2", "--nx", "33"]));
    let bm = report(&isoforge(&["bm-distance", "--m", "lp:1.5"]));
    assert_eq!(v["passed"], true);
    for key in ["distortion_min", "distortion_max"] {
        assert!((num(&v[key]) - num(&bm["distance"])).abs() < 5e-2);
    }
}

#[test]
fn reports_are_reproducible_with_timestamps_in_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = isoforge(&["beltrami", "--mu", "bump:0.3", "--nx", "17", "--out", d.to_str().unwrap(), "--svg"]);
        report(&out);
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "report.json"), read(&b, "report.json"));
    assert_eq!(read(&a, "map.csv"), read(&b, "map.csv"));
    assert!(b.join("map.svg").exists());
    let meta: Value = serde_json::from_slice(&read(&a, "report.meta.json")).unwrap();
    assert!(num(&meta["started_unix"]) > 0.0);
    let rep = String::from_utf8(read(&a, "report.json")).unwrap();
    assert!(!rep.contains("unix"));
    assert!(rep.contains("\"schema\": 1"));
}

#[test]
fn field_file_with_resolution_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.json");
    let file = r#"{"domain": {"x0": -1, "y0": -1, "x1": 1, "y1": 1, "nx": 33, "ny": 33}, "preset": "linf"}"#;
    std::fs::write(&path, file).unwrap();
    let r = report(&isoforge(&["uniformize", "--field", path.to_str().unwrap(), "--nx", "17"]));
    assert_eq!(r["nx"], 17);
    assert!((num(&r["dilatations"]["distortion"]) - 2f64.sqrt()).abs() < 1e-2);
}

#[test]
fn modulus_batch_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"[{"quad": {"x0": 0, "y0": 0, "x1": 1, "y1": 1}}]"#).unwrap();
    let r = report(&isoforge(&[
        "modulus",
        "--domain",
        "0,0,1,1",
        "--nx",
        "17",
        "--quad",
        "0,0,1,0.5",
        "--spec",
        spec.to_str().unwrap(),
        "--paths",
    ]));
    let results = r["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert!((num(&results[0]["horizontal"]["value"]) - 0.5).abs() < 2e-2);
    assert!((num(&results[1]["product"]) - 1.0).abs() < 5e-2);
    let paths = results[1]["horizontal"]["paths"].as_array().unwrap();
    assert!(!paths.is_empty());
    assert_eq!(paths[0][0].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let parse = isoforge(&["bm-distance", "--m", "nonsense"]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(stderr_line(&parse).starts_with("error kind=parse code=2:"));

    let missing = isoforge(&["bm-distance"]);
    assert_eq!(missing.status.code(), Some(2));
    stderr_line(&missing);

    let coarse = isoforge(&["uniformize", "--nx", "9"]);
    assert_eq!(coarse.status.code(), Some(3));
    assert!(stderr_line(&coarse).starts_with("error kind=precondition code=3:"));

    let radius = isoforge(&["verify-annulus", "--p", "3", "--r", "0.5"]);
    assert_eq!(radius.status.code(), Some(3));

    let svg = isoforge(&["uniformize", "--svg"]);
    assert_eq!(svg.status.code(), Some(3));

    let threads = Command::new(env!("CARGO_BIN_EXE_isoforge"))
        .args(["bm-distance", "--m", "l1"])
        .env("ISOFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn thread_cap_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_isoforge"))
        .args(["bm-distance", "--m", "l1"])
        .env("ISOFORGE_THREADS", "1")
        .output()
        .unwrap();
    assert!((num(&report(&out)["distance"]) - 2f64.sqrt()).abs() < 1e-3);
}
