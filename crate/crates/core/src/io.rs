//! Scene files, CSV and JSON outputs, and run manifests.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::billiard::{reflect_velocity, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::genericity::{CensusRow, RealizedEvent};
use crate::geometry::{BilliardConfig, Bump, Scatterer, Shape, Tolerances};
use crate::singularity::TangencyRow;

/// One scatterer as written in a scene file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneScatterer {
    pub kind: String,
    pub center: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bumps: Vec<Bump>,
}

/// The scene JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub dimension: usize,
    pub scatterers: Vec<SceneScatterer>,
    pub horizon_bound: f64,
    pub tau0: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl SceneFile {
    pub fn into_config(self) -> Result<BilliardConfig> {
        let mut scatterers = Vec::with_capacity(self.scatterers.len());
        for (id, s) in self.scatterers.into_iter().enumerate() {
            let mut base = match (s.kind.as_str(), s.radius, s.semi_axes) {
                ("sphere", Some(r), _) => Scatterer::sphere(id, &s.center, r),
                ("ellipsoid", _, Some(a)) => Scatterer::ellipsoid(id, &s.center, &a),
                ("bump_perturbed", Some(r), _) => Scatterer::sphere(id, &s.center, r),
                ("bump_perturbed", _, Some(a)) => Scatterer::ellipsoid(id, &s.center, &a),
                (kind, _, _) => {
                    return Err(Error::InvalidInput(format!(
                        "scatterer {id}: kind '{kind}' needs radius (sphere) or semi_axes (ellipsoid)"
                    )))
                }
            };
            base.bumps = s.bumps;
            scatterers.push(base);
        }
        let cfg = BilliardConfig {
            dimension: self.dimension,
            scatterers,
            horizon_bound: self.horizon_bound,
            tau0: self.tau0,
            tolerances: self.tolerances,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &BilliardConfig) -> Self {
        let scatterers = cfg
            .scatterers
            .iter()
            .map(|s| {
                let (radius, semi_axes) = match &s.shape {
                    Shape::Sphere { radius } => (Some(*radius), None),
                    Shape::Ellipsoid { semi_axes } => (None, Some(semi_axes.clone())),
                };
                let kind = match (&s.shape, s.bumps.is_empty()) {
                    (_, false) => "bump_perturbed",
                    (Shape::Sphere { .. }, true) => "sphere",
                    (Shape::Ellipsoid { .. }, true) => "ellipsoid",
                };
                SceneScatterer {
                    kind: kind.into(),
                    center: s.center.clone(),
                    radius,
                    semi_axes,
                    bumps: s.bumps.clone(),
                }
            })
            .collect();
        SceneFile {
            dimension: cfg.dimension,
            scatterers,
            horizon_bound: cfg.horizon_bound,
            tau0: cfg.tau0,
            tolerances: cfg.tolerances.clone(),
        }
    }
}

pub fn scene_from_json(text: &str) -> Result<BilliardConfig> {
    serde_json::from_str::<SceneFile>(text)?.into_config()
}

pub fn scene_to_json(cfg: &BilliardConfig) -> String {
    serde_json::to_string_pretty(&SceneFile::from_config(cfg)).expect("scene serializes")
}

/// Reads a scene and returns it with the SHA-256 of the file bytes.
pub fn load_scene(path: &Path) -> Result<(BilliardConfig, String)> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((scene_from_json(&text)?, sha256_hex(&bytes)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Shortest round-trip decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_csv(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(csv_error)?;
    for r in rows {
        w.write_record(&r).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn indexed(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (0..d).map(move |i| format!("{prefix}_{i}"))
}

fn trajectory_header(d: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "scatterer_id".to_string()];
    h.extend(indexed("shift", d));
    h.extend(indexed("q", d));
    h.extend(indexed("v", d));
    h.extend(["t_flight", "cos_phi", "tangency"].map(String::from));
    h
}

/// Trajectory CSV: row 0 is the initial state, row `k` the state after event `k`.
pub fn trajectory_csv(cfg: &BilliardConfig, rec: &TrajectoryRecord) -> Result<Vec<u8>> {
    let d = cfg.dimension;
    let mut rows = Vec::with_capacity(rec.events.len() + 1);
    let x = &rec.initial;
    let n0 = cfg.gradient_direction(&x.instance, &x.q)?;
    let mut row = |step: usize, base: usize, shift: &[i64], q: &[f64], v: &[f64], t: f64, cos: f64, tangency: bool| {
        let mut r = vec![step.to_string(), base.to_string()];
        r.extend(shift.iter().map(|s| s.to_string()));
        r.extend(q.iter().map(|a| fmt_f64(*a)));
        r.extend(v.iter().map(|a| fmt_f64(*a)));
        r.extend([fmt_f64(t), fmt_f64(cos), tangency.to_string()]);
        rows.push(r);
    };
    row(0, x.instance.base, &x.instance.shift, x.q.as_slice(), x.v.as_slice(), 0.0, x.v.dot(&n0), false);
    let mut v = x.v.clone();
    for (k, e) in rec.events.iter().enumerate() {
        if !e.tangency {
            let n = cfg.gradient_direction(&e.instance, &e.q_hit)?;
            v = reflect_velocity(&v, &n);
        }
        row(k + 1, e.instance.base, &e.instance.shift, e.q_hit.as_slice(), v.as_slice(), e.t_flight, e.cos_phi, e.tangency);
    }
    write_csv(trajectory_header(d), rows)
}

/// Trajectory CSV for a realized constraint problem; tangency rows carry the
/// closest-approach point and a zero flight time is never written.
pub fn realized_csv(cfg: &BilliardConfig, events: &[RealizedEvent]) -> Result<Vec<u8>> {
    let d = cfg.dimension;
    let mut rows = Vec::with_capacity(events.len());
    let mut prev: Option<&RealizedEvent> = None;
    for (k, e) in events.iter().enumerate() {
        let t = prev.map_or(0.0, |p| (&e.q - &p.q).norm());
        let mut r = vec![k.to_string(), e.instance.base.to_string()];
        r.extend(e.instance.shift.iter().map(|s| s.to_string()));
        r.extend(e.q.iter().map(|a| fmt_f64(*a)));
        r.extend(e.v.iter().map(|a| fmt_f64(*a)));
        r.extend([fmt_f64(t), fmt_f64(e.cos_phi), e.residual.is_some().to_string()]);
        rows.push(r);
        prev = Some(e);
    }
    write_csv(trajectory_header(d), rows)
}

/// Metadata written next to each trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub index: usize,
    pub seed: u64,
    pub termination: crate::billiard::Termination,
    pub n_events: usize,
    pub tangencies: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_residual: Option<Vec<f64>>,
}

pub fn census_csv(rows: &[CensusRow]) -> Result<Vec<u8>> {
    let header = ["j", "trials", "converged", "best_residual", "median_iters"].map(String::from).to_vec();
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.j.to_string(),
                r.trials.to_string(),
                r.converged.to_string(),
                fmt_f64(r.best_residual),
                fmt_f64(r.median_iters),
            ]
        })
        .collect();
    write_csv(header, rows)
}

pub fn tangency_csv(d: usize, rows: &[TangencyRow]) -> Result<Vec<u8>> {
    let mut header: Vec<String> = indexed("p", d).chain(indexed("v", d)).collect();
    header.extend(["t_star", "res_F", "res_dF"].map(String::from));
    let rows = rows
        .iter()
        .map(|r| {
            let mut out: Vec<String> = r.p.iter().chain(&r.v).map(|a| fmt_f64(*a)).collect();
            out.extend([fmt_f64(r.t_star), fmt_f64(r.res_f), fmt_f64(r.res_df)]);
            out
        })
        .collect();
    write_csv(header, rows)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

/// Provenance of one command run. Everything except `wall_clock_seconds` is a
/// function of the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_sha256: Option<String>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub parameters: serde_json::Value,
    pub tool_version: String,
    /// Output file name to SHA-256 of its bytes.
    pub outputs: Vec<(String, String)>,
    pub wall_clock_seconds: f64,
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"{
        "dimension": 2,
        "scatterers": [
            {"kind": "sphere", "center": [0.0, 0.0], "radius": 0.38},
            {"kind": "ellipsoid", "center": [0.5, 0.5], "semi_axes": [0.14, 0.1]}
        ],
        "horizon_bound": 2.0,
        "tau0": 0.1,
        "tolerances": {"tangency_cos": 1e-6}
    }"#;

    #[test]
    fn scene_round_trip() {
        let cfg = scene_from_json(SCENE).unwrap();
        assert_eq!(cfg.scatterers.len(), 2);
        assert_eq!(cfg.tolerances.tangency_cos, 1e-6);
        assert_eq!(cfg.tolerances.on_surface, 1e-10);
        let again = scene_from_json(&scene_to_json(&cfg)).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn bad_kind_is_input_error() {
        let text = SCENE.replace("\"ellipsoid\"", "\"torus\"");
        let err = scene_from_json(&text).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1e-20), "1e-20");
    }
}
