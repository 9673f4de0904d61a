use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn disperse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disperse")).args(args).output().unwrap()
}

fn out_dir(tmp: &tempfile::TempDir, name: &str) -> PathBuf {
    tmp.path().join(name)
}

#[test]
fn period_two_orbit_has_unit_cosines() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "p2");
    let o = disperse(&[
        "simulate", "--scene", &fixture("pair2d.json"), "--steps", "8",
        "--start-base", "0", "--start-q", "0.38,0", "--start-v", "1,0",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("trajectory_00000.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let cos = header.iter().position(|h| h == "cos_phi").unwrap();
    let tangency = header.iter().position(|h| h == "tangency").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert_eq!(r[cos].parse::<f64>().unwrap(), 1.0);
        assert_eq!(&r[tangency], "false");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["scene_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn repeated_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = out_dir(&tmp, name);
        let o = disperse(&[
            "simulate", "--scene", &fixture("pair2d.json"), "--steps", "30", "--trajectories", "3",
            "--seed", "11", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        (0..3)
            .map(|i| fs::read(out.join(format!("trajectory_{i:05}.csv"))).unwrap())
            .collect::<Vec<_>>()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_ne!(a[0], a[1]);
}

#[test]
fn overlapping_scene_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "bad");
    let o = disperse(&["simulate", "--scene", &fixture("overlap2d.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("min_gap") && err.contains("overlap"), "{err}");
    assert!(!out.join("manifest.json").exists());

    let o = disperse(&["validate", "--scene", &fixture("overlap2d.json")]);
    assert_eq!(o.status.code(), Some(2));
    let o = disperse(&["validate", "--scene", &fixture("pair2d.json")]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["flags"].as_array().unwrap().is_empty());
}

#[test]
fn bad_input_exit_code() {
    let o = disperse(&["validate", "--scene", "/nonexistent/scene.json"]);
    assert_eq!(o.status.code(), Some(4));
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("s.json");
    fs::write(&p, "{\"dimension\": 2}").unwrap();
    let o = disperse(&["validate", "--scene", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn field_without_zeros_is_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "nz");
    let o = disperse(&["tube", "--field", "no-zero", "--n", "2000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tube_and_blowup_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "tube");
    let o = disperse(&["tube", "--field", "hyperplane", "--n", "50000", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&fs::read(out.join("tube.json")).unwrap()).unwrap();
    let slope = r["slope"].as_f64().unwrap();
    assert!((0.9..1.1).contains(&slope), "{slope}");
    assert_eq!(r["fractions"].as_array().unwrap().len(), 7);

    let out = out_dir(&tmp, "blowup");
    let o = disperse(&["blowup", "--scene", &fixture("pair2d.json"), "--seed", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&fs::read(out.join("blowup.json")).unwrap()).unwrap();
    let tau = r["tau"]["slope"].as_f64().unwrap();
    let ups = r["upsilon"]["slope"].as_f64().unwrap();
    assert!((-0.55..=-0.45).contains(&tau), "{tau}");
    assert!(ups.abs() <= 0.05, "{ups}");
}

#[test]
fn census_writes_rows_and_witnesses() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "census");
    let o = disperse(&[
        "census", "--scene", &fixture("pair2d.json"), "--j-max", "3", "--trials", "20", "--seed", "1",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("census.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "j,trials,converged,best_residual,median_iters");
    assert_eq!(lines.count(), 3);
    let witnesses: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("witness_") && n.ends_with(".json"))
        .collect();
    assert!(!witnesses.is_empty());
    let w: serde_json::Value = serde_json::from_slice(&fs::read(out.join(&witnesses[0])).unwrap()).unwrap();
    assert!(w["constraint_residual"].is_array());
}

#[test]
fn help_lists_defaults_and_tolerances() {
    for cmd in ["simulate", "blowup", "census", "validate", "tube"] {
        let o = disperse(&[cmd, "--help"]);
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in ["--on-surface", "--gradient-floor", "--tangency-cos", "--newton-residual", "--newton-max-iter"] {
            assert!(text.contains(flag), "{cmd} help lacks {flag}");
        }
        for default in ["1e-10", "1e-8", "1e-7", "1e-12", "[default: 50]"] {
            assert!(text.contains(default), "{cmd} help lacks {default}");
        }
    }
}

#[test]
fn tolerance_override_reaches_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "tol");
    let o = disperse(&[
        "simulate", "--scene", &fixture("pair2d.json"), "--steps", "3", "--tangency-cos", "1e-5",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["tolerances"]["tangency_cos"].as_f64(), Some(1e-5));
}
