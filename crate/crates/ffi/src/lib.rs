//! C interface to `disperse`.
//!
//! Scenes and trajectories are opaque handles created and released through
//! this API. Every fallible call returns a [`DisperseStatus`]; the message of
//! the most recent failure on the calling thread is available from
//! [`disperse_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use disperse::billiard::{billiard_map_n, random_phase_point, PhasePoint, Termination, TrajectoryRecord};
use disperse::geometry::{validate_configuration, BilliardConfig, ScattererInstance};
use disperse::linalg::vector;
use disperse::singularity::sample_tangency_set;
use disperse::{io, rng, Error};

/// Result of an API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisperseStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed input: bad JSON, wrong lengths, out-of-range index.
    InvalidInput = 2,
    /// The scene or start point failed validation.
    Validation = 3,
    /// A solver did not converge or the dynamics hit a degenerate case.
    Numerical = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// A validated billiard configuration.
pub struct DisperseScene {
    cfg: BilliardConfig,
}

/// A finished trajectory of the billiard map.
pub struct DisperseTrajectory {
    record: TrajectoryRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend_from_slice(msg.as_bytes());
    });
}

fn status_of(e: &Error) -> DisperseStatus {
    set_error(&e.to_string());
    match e.exit_code() {
        2 => DisperseStatus::Validation,
        4 => DisperseStatus::InvalidInput,
        _ => DisperseStatus::Numerical,
    }
}

fn fail(status: DisperseStatus, msg: &str) -> DisperseStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> DisperseStatus) -> DisperseStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(DisperseStatus::Panic, "internal panic"))
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn disperse_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a scene from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn disperse_scene_from_json(json: *const c_char, out: *mut *mut DisperseScene) -> DisperseStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(DisperseStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(DisperseStatus::InvalidInput, "scene is not UTF-8");
        };
        match io::scene_from_json(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(DisperseScene { cfg }));
                DisperseStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a scene. Null is ignored.
///
/// # Safety
/// `scene` must come from [`disperse_scene_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn disperse_scene_free(scene: *mut DisperseScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Ambient dimension, or 0 for a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn disperse_scene_dimension(scene: *const DisperseScene) -> usize {
    scene.as_ref().map_or(0, |s| s.cfg.dimension)
}

/// Number of scatterers in the fundamental domain, or 0 for a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn disperse_scene_scatterer_count(scene: *const DisperseScene) -> usize {
    scene.as_ref().map_or(0, |s| s.cfg.scatterers.len())
}

/// Runs the scene checks; `*valid` is 1 when every check passes.
///
/// # Safety
/// `scene` must be a live handle and `valid` writable.
#[no_mangle]
pub unsafe extern "C" fn disperse_scene_validate(
    scene: *const DisperseScene,
    samples: usize,
    seed: u64,
    valid: *mut c_int,
) -> DisperseStatus {
    guard(|| {
        let (Some(s), false) = (scene.as_ref(), valid.is_null()) else {
            return fail(DisperseStatus::NullPointer, "null argument");
        };
        let report = validate_configuration(&s.cfg, samples, seed);
        if !report.is_valid() {
            set_error(&report.flags.join("; "));
        }
        *valid = c_int::from(report.is_valid());
        DisperseStatus::Ok
    })
}

fn start_point(cfg: &BilliardConfig, base: usize, q: &[f64], v: &[f64]) -> Result<PhasePoint, Error> {
    if base >= cfg.scatterers.len() {
        return Err(Error::InvalidInput(format!("no scatterer {base}")));
    }
    let inst = ScattererInstance::origin(base, cfg.dimension);
    let q = vector(q);
    let value = cfg.value(&inst, &q);
    if value.abs() > cfg.tolerances.on_surface.max(1e-9) {
        return Err(Error::InvalidStart { scatterer: base, value });
    }
    let v = vector(v);
    let norm = v.norm();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::InvalidInput("zero velocity".into()));
    }
    let v = v / norm;
    if v.dot(&cfg.gradient_direction(&inst, &q)?) < 0.0 {
        return Err(Error::InvalidInput("velocity points into the scatterer".into()));
    }
    Ok(PhasePoint::new(inst, q, v))
}

/// Iterates the billiard map `steps` times from `(q, v)` on scatterer `base`
/// (origin cell). `q` and `v` hold `dimension` doubles each; `v` is the
/// outgoing velocity and is normalized.
///
/// # Safety
/// `scene` must be live, `q`/`v` readable for `dimension` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn disperse_simulate(
    scene: *const DisperseScene,
    base: usize,
    q: *const f64,
    v: *const f64,
    steps: usize,
    out: *mut *mut DisperseTrajectory,
) -> DisperseStatus {
    guard(|| {
        let Some(s) = scene.as_ref() else {
            return fail(DisperseStatus::NullPointer, "null scene");
        };
        if q.is_null() || v.is_null() || out.is_null() {
            return fail(DisperseStatus::NullPointer, "null argument");
        }
        let d = s.cfg.dimension;
        let q = std::slice::from_raw_parts(q, d);
        let v = std::slice::from_raw_parts(v, d);
        let result = start_point(&s.cfg, base, q, v).and_then(|x| billiard_map_n(&s.cfg, &x, steps, false));
        match result {
            Ok(record) => {
                *out = Box::into_raw(Box::new(DisperseTrajectory { record }));
                DisperseStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Like [`disperse_simulate`] from a seeded uniform random start.
///
/// # Safety
/// `scene` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn disperse_simulate_random(
    scene: *const DisperseScene,
    seed: u64,
    steps: usize,
    out: *mut *mut DisperseTrajectory,
) -> DisperseStatus {
    guard(|| {
        let (Some(s), false) = (scene.as_ref(), out.is_null()) else {
            return fail(DisperseStatus::NullPointer, "null argument");
        };
        let x = random_phase_point(&s.cfg, &mut rng::stream(seed, 0));
        match billiard_map_n(&s.cfg, &x, steps, false) {
            Ok(record) => {
                *out = Box::into_raw(Box::new(DisperseTrajectory { record }));
                DisperseStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must come from a simulate call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn disperse_trajectory_free(traj: *mut DisperseTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of recorded collisions, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn disperse_trajectory_len(traj: *const DisperseTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.record.events.len())
}

/// 1 when the trajectory ran all requested steps, 0 when it stopped early.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn disperse_trajectory_completed(traj: *const DisperseTrajectory) -> c_int {
    traj.as_ref()
        .map_or(0, |t| c_int::from(t.record.termination == Termination::Completed))
}

/// Collision `index`: base scatterer, hit point (`dimension` doubles), flight
/// time, `cos phi` and the tangency flag. Any output pointer may be null.
///
/// # Safety
/// `traj` must be live; non-null outputs must be writable (`q` for `dimension` doubles).
#[no_mangle]
pub unsafe extern "C" fn disperse_trajectory_event(
    traj: *const DisperseTrajectory,
    index: usize,
    base: *mut usize,
    q: *mut f64,
    t_flight: *mut f64,
    cos_phi: *mut f64,
    tangency: *mut c_int,
) -> DisperseStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return fail(DisperseStatus::NullPointer, "null trajectory");
        };
        let Some(e) = t.record.events.get(index) else {
            return fail(DisperseStatus::InvalidInput, "event index out of range");
        };
        if let Some(b) = base.as_mut() {
            *b = e.instance.base;
        }
        if !q.is_null() {
            ptr::copy_nonoverlapping(e.q_hit.as_ptr(), q, e.q_hit.len());
        }
        if let Some(x) = t_flight.as_mut() {
            *x = e.t_flight;
        }
        if let Some(x) = cos_phi.as_mut() {
            *x = e.cos_phi;
        }
        if let Some(x) = tangency.as_mut() {
            *x = c_int::from(e.tangency);
        }
        DisperseStatus::Ok
    })
}

/// A random line tangent to scatterer `base`: point `p` and unit direction `v`
/// (`dimension` doubles each, `(p, v) = 0`) and the contact parameter.
///
/// # Safety
/// `scene` must be live; `p`, `v` writable for `dimension` doubles; `t_star` writable or null.
#[no_mangle]
pub unsafe extern "C" fn disperse_tangent_line(
    scene: *const DisperseScene,
    base: usize,
    seed: u64,
    p: *mut f64,
    v: *mut f64,
    t_star: *mut f64,
) -> DisperseStatus {
    guard(|| {
        let Some(s) = scene.as_ref() else {
            return fail(DisperseStatus::NullPointer, "null scene");
        };
        if p.is_null() || v.is_null() {
            return fail(DisperseStatus::NullPointer, "null argument");
        }
        if base >= s.cfg.scatterers.len() {
            return fail(DisperseStatus::InvalidInput, "scatterer index out of range");
        }
        let inst = ScattererInstance::origin(base, s.cfg.dimension);
        match sample_tangency_set(&s.cfg, &inst, 1, seed) {
            Ok(mut sols) => {
                let sol = sols.remove(0);
                ptr::copy_nonoverlapping(sol.line.p.as_ptr(), p, sol.line.p.len());
                ptr::copy_nonoverlapping(sol.line.v.as_ptr(), v, sol.line.v.len());
                if let Some(t) = t_star.as_mut() {
                    *t = sol.t_star;
                }
                DisperseStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}
