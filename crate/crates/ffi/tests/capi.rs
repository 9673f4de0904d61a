use std::ffi::{c_char, c_int, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use disperse_ffi::*;

const PAIR: &str = r#"{
    "dimension": 2,
    "scatterers": [
        {"kind": "sphere", "center": [0.0, 0.0], "radius": 0.38},
        {"kind": "sphere", "center": [0.5, 0.5], "radius": 0.14}
    ],
    "horizon_bound": 2.0,
    "tau0": 0.1
}"#;

fn scene(json: &str) -> (DisperseStatus, *mut DisperseScene) {
    let text = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { disperse_scene_from_json(text.as_ptr(), &mut out) };
    (status, out)
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { disperse_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn scene_lifecycle() {
    let (status, s) = scene(PAIR);
    assert_eq!(status, DisperseStatus::Ok);
    unsafe {
        assert_eq!(disperse_scene_dimension(s), 2);
        assert_eq!(disperse_scene_scatterer_count(s), 2);
        let mut valid: c_int = -1;
        assert_eq!(disperse_scene_validate(s, 100, 1, &mut valid), DisperseStatus::Ok);
        assert_eq!(valid, 1);
        disperse_scene_free(s);
        disperse_scene_free(ptr::null_mut());
        assert_eq!(disperse_scene_dimension(ptr::null()), 0);
    }
}

#[test]
fn bad_json_reports_error() {
    let (status, s) = scene("{\"dimension\": 2");
    assert_eq!(status, DisperseStatus::InvalidInput);
    assert!(s.is_null());
    assert!(!last_error().is_empty());

    let (status, _) = scene(&PAIR.replace("\"sphere\", \"center\": [0.5", "\"cone\", \"center\": [0.5"));
    assert_eq!(status, DisperseStatus::InvalidInput);
    assert!(last_error().contains("cone"));
}

#[test]
fn null_arguments() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { disperse_scene_from_json(ptr::null(), &mut out) }, DisperseStatus::NullPointer);
    let mut traj = ptr::null_mut();
    let q = [0.38, 0.0];
    assert_eq!(
        unsafe { disperse_simulate(ptr::null(), 0, q.as_ptr(), q.as_ptr(), 3, &mut traj) },
        DisperseStatus::NullPointer
    );
}

#[test]
fn period_two_orbit() {
    let (_, s) = scene(PAIR);
    let q = [0.38, 0.0];
    let v = [1.0, 0.0];
    let mut traj = ptr::null_mut();
    unsafe {
        assert_eq!(disperse_simulate(s, 0, q.as_ptr(), v.as_ptr(), 6, &mut traj), DisperseStatus::Ok);
        assert_eq!(disperse_trajectory_len(traj), 6);
        assert_eq!(disperse_trajectory_completed(traj), 1);
        for i in 0..6 {
            let mut base = 99usize;
            let mut hit = [0.0; 2];
            let (mut t, mut cos, mut tan) = (0.0, 0.0, -1);
            let st = disperse_trajectory_event(traj, i, &mut base, hit.as_mut_ptr(), &mut t, &mut cos, &mut tan);
            assert_eq!(st, DisperseStatus::Ok);
            assert_eq!(base, 0);
            assert!((t - 0.24).abs() < 1e-12);
            assert!((cos - 1.0).abs() < 1e-12);
            assert_eq!(tan, 0);
        }
        assert_eq!(
            disperse_trajectory_event(traj, 6, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            DisperseStatus::InvalidInput
        );
        disperse_trajectory_free(traj);
        disperse_scene_free(s);
    }
}

#[test]
fn start_off_surface_is_validation_error() {
    let (_, s) = scene(PAIR);
    let q = [0.3, 0.0];
    let v = [1.0, 0.0];
    let mut traj = ptr::null_mut();
    unsafe {
        assert_eq!(disperse_simulate(s, 0, q.as_ptr(), v.as_ptr(), 3, &mut traj), DisperseStatus::Validation);
        assert!(traj.is_null());
        disperse_scene_free(s);
    }
}

#[test]
fn random_runs_are_seeded() {
    let (_, s) = scene(PAIR);
    let run = |seed| unsafe {
        let mut traj = ptr::null_mut();
        assert_eq!(disperse_simulate_random(s, seed, 20, &mut traj), DisperseStatus::Ok);
        let mut hits = Vec::new();
        for i in 0..disperse_trajectory_len(traj) {
            let mut q = [0.0; 2];
            disperse_trajectory_event(traj, i, ptr::null_mut(), q.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
            hits.push(q);
        }
        disperse_trajectory_free(traj);
        hits
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
    unsafe { disperse_scene_free(s) };
}

#[test]
fn tangent_line_grazes() {
    let (_, s) = scene(PAIR);
    let (mut p, mut v) = ([0.0; 2], [0.0; 2]);
    let mut t = f64::NAN;
    unsafe {
        assert_eq!(disperse_tangent_line(s, 1, 3, p.as_mut_ptr(), v.as_mut_ptr(), &mut t), DisperseStatus::Ok);
        let x = [p[0] + t * v[0] - 0.5, p[1] + t * v[1] - 0.5];
        assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 0.14).abs() < 1e-10);
        assert!((p[0] * v[0] + p[1] * v[1]).abs() < 1e-12);
        assert_eq!(disperse_tangent_line(s, 7, 3, p.as_mut_ptr(), v.as_mut_ptr(), &mut t), DisperseStatus::InvalidInput);
        disperse_scene_free(s);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("disperse.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["disperse_scene_from_json", "disperse_simulate", "disperse_last_error", "DISPERSE_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99"]).arg(&header).output() else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
