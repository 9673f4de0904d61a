use serde::{Deserialize, Serialize};

use crate::geometry::ScattererInstance;
use crate::linalg::{self, Vector};

/// Boundary phase-space element `(q, v)` with `q` in universal-cover coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub instance: ScattererInstance,
    pub q: Vector,
    pub v: Vector,
}

impl PhasePoint {
    pub fn new(instance: ScattererInstance, q: Vector, v: Vector) -> Self {
        PhasePoint { instance, q, v }
    }

    /// Max-norm distance in `(q, v)`; instances must agree or the result is infinite.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        if self.instance != other.instance {
            return f64::INFINITY;
        }
        let dq = (&self.q - &other.q).amax();
        let dv = (&self.v - &other.v).amax();
        dq.max(dv)
    }
}

/// An oriented line `{p + t v}` with `(p, v) = 0`, `|v| = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedLine {
    pub p: Vector,
    pub v: Vector,
}

impl OrientedLine {
    /// Line through `x` with direction `dir` (normalized here).
    pub fn through(x: &Vector, dir: &Vector) -> Self {
        let v = dir.normalize();
        let p = linalg::project_orthogonal(x, &v);
        OrientedLine { p, v }
    }

    pub fn point_at(&self, t: f64) -> Vector {
        &self.p + &self.v * t
    }

    /// Max-norm distance in `(p, v)`.
    pub fn distance(&self, other: &OrientedLine) -> f64 {
        (&self.p - &other.p).amax().max((&self.v - &other.v).amax())
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }
}

/// One collision record.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionEvent {
    pub instance: ScattererInstance,
    pub t_flight: f64,
    pub q_hit: Vector,
    /// `-(v_in, n(q_hit)) = (v_out, n(q_hit))`; 1 for a head-on hit, 0 at tangency.
    pub cos_phi: f64,
    pub tangency: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    TangencyAbort,
    NoHit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub initial: PhasePoint,
    pub events: Vec<ReflectionEvent>,
    pub final_point: PhasePoint,
    pub termination: Termination,
}
