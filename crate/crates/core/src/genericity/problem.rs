//! Trajectories with prescribed tangencies as a nonlinear least-squares problem
//! in line coordinates.

use serde::{Deserialize, Serialize};

use crate::billiard::{first_hit_from, line_minimum, reflect_velocity, HitOutcome, LineChart, OrientedLine};
use crate::roots;
use crate::error::{Error, Result};
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::linalg::{self, Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Reflection,
    Tangency,
}

/// An ordered combinatorial type together with the chart its unknown initial
/// line lives in. Event 0 is the first meeting of that line with its instance.
#[derive(Clone, Debug)]
pub struct TangencyConstraintProblem<'a> {
    pub cfg: &'a BilliardConfig,
    pub events: Vec<(ScattererInstance, EventKind)>,
    pub chart: LineChart,
}

/// One realized event of a candidate trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizedEvent {
    pub instance: ScattererInstance,
    pub kind: EventKind,
    /// Reflection point, or the closest approach for tangency events.
    pub q: Vector,
    /// Velocity after the event.
    pub v: Vector,
    /// `(v_out, n)` at reflections; 0 at tangency events.
    pub cos_phi: f64,
    /// Signed miss distance `F_bar / |grad R|` at tangency events.
    pub residual: Option<f64>,
}

impl<'a> TangencyConstraintProblem<'a> {
    pub fn new(cfg: &'a BilliardConfig, events: Vec<(ScattererInstance, EventKind)>, base: &OrientedLine) -> Self {
        TangencyConstraintProblem {
            cfg,
            events,
            chart: LineChart::at(base),
        }
    }

    /// Number of tangency constraints.
    pub fn j(&self) -> usize {
        self.events.iter().filter(|(_, k)| *k == EventKind::Tangency).count()
    }

    pub fn unknowns(&self) -> usize {
        self.chart.dim()
    }

    /// Runs the combinatorial type from the line at `coords`.
    ///
    /// Tangency events are followed straight through the point of closest
    /// approach. A reflection that lands on a different instance, a blocked
    /// segment or a missing hit is reported as infeasible at that step.
    pub fn realize(&self, coords: &[f64]) -> Result<Vec<RealizedEvent>> {
        let cfg = self.cfg;
        let line = self.chart.line(coords);
        let mut out: Vec<RealizedEvent> = Vec::with_capacity(self.events.len());
        let mut q = line.p.clone();
        let mut v = line.v.clone();
        for (step, (inst, kind)) in self.events.iter().enumerate() {
            let infeasible = |reason: String| Error::Infeasible { step, reason };
            let prev = out.last().map(|e| &e.instance);
            let event = match kind {
                EventKind::Tangency => {
                    let (t_star, f_star) = line_minimum(cfg, inst, &q, &v).ok_or_else(|| infeasible("no closest approach".into()))?;
                    if step > 0 {
                        if t_star <= 0.0 {
                            return Err(infeasible("tangency instance behind the ray".into()));
                        }
                        if t_star > cfg.horizon_bound {
                            return Err(infeasible("tangency beyond the horizon".into()));
                        }
                        match first_hit_from(cfg, &q, &v, 0.0, prev).map_err(|e| infeasible(e.to_string()))? {
                            HitOutcome::Hit(e) if e.instance != *inst && e.t_flight < t_star => {
                                return Err(infeasible(format!("blocked by scatterer {}", e.instance.base)));
                            }
                            _ => {}
                        }
                    }
                    let q_star = &q + &v * t_star;
                    let (_, g) = cfg.value_grad(inst, &q_star);
                    let gn = g.norm();
                    if gn < cfg.tolerances.gradient_floor {
                        return Err(infeasible("degenerate gradient".into()));
                    }
                    RealizedEvent {
                        instance: inst.clone(),
                        kind: *kind,
                        q: q_star,
                        v: v.clone(),
                        cos_phi: 0.0,
                        residual: Some(f_star / gn),
                    }
                }
                EventKind::Reflection => {
                    let q_hit = if step == 0 {
                        let (t_star, f_star) = line_minimum(cfg, inst, &q, &v).ok_or_else(|| infeasible("no closest approach".into()))?;
                        if f_star >= -cfg.tolerances.newton_residual {
                            return Err(infeasible("initial line misses its first scatterer".into()));
                        }
                        let (a, b) = (t_star - 2.0 * cfg.scatterer(inst).extent(), t_star);
                        let f = |t: f64| {
                            let (r, g) = cfg.value_grad(inst, &(&q + &v * t));
                            (r, g.dot(&v))
                        };
                        let t = roots::bracketed_newton(f, a, b, 0.5 * (a + b), 1e-16, 200)
                            .ok_or_else(|| infeasible("entry point not found".into()))?;
                        &q + &v * t
                    } else {
                        match first_hit_from(cfg, &q, &v, 0.0, prev).map_err(|e| infeasible(e.to_string()))? {
                            HitOutcome::Hit(e) if e.instance == *inst => e.q_hit,
                            HitOutcome::Hit(e) => return Err(infeasible(format!("hit scatterer {} instead", e.instance.base))),
                            HitOutcome::NoHit => return Err(infeasible("no hit".into())),
                        }
                    };
                    let n = cfg.gradient_direction(inst, &q_hit).map_err(|e| infeasible(e.to_string()))?;
                    let cos = -v.dot(&n);
                    if cos <= cfg.tolerances.tangency_cos {
                        return Err(infeasible("reflection became tangent".into()));
                    }
                    let v_out = reflect_velocity(&v, &n);
                    RealizedEvent {
                        instance: inst.clone(),
                        kind: *kind,
                        q: q_hit,
                        v: v_out,
                        cos_phi: cos,
                        residual: None,
                    }
                }
            };
            q = event.q.clone();
            v = event.v.clone();
            out.push(event);
        }
        Ok(out)
    }
}

/// Signed miss distances at the tangency-marked events, in order.
pub fn tangency_residuals(problem: &TangencyConstraintProblem, coords: &[f64]) -> Result<Vec<f64>> {
    Ok(problem.realize(coords)?.iter().filter_map(|e| e.residual).collect())
}

/// Outcome of [`multi_tangency_solve`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub coords: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Condition number of the residual Jacobian at the returned point.
    pub condition: f64,
}

/// Residual norm below which a tangency system counts as solved.
pub const CONVERGED_RESIDUAL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 60;
const FD_STEP: f64 = 1e-7;

fn jacobian(problem: &TangencyConstraintProblem, c: &[f64], j: usize) -> Result<Matrix> {
    let n = c.len();
    let mut jac = Matrix::zeros(j, n);
    for k in 0..n {
        let mut a = c.to_vec();
        let mut b = c.to_vec();
        a[k] += FD_STEP;
        b[k] -= FD_STEP;
        let (ra, rb) = (tangency_residuals(problem, &a)?, tangency_residuals(problem, &b)?);
        for i in 0..j {
            jac[(i, k)] = (ra[i] - rb[i]) / (2.0 * FD_STEP);
        }
    }
    Ok(jac)
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gauss-Newton with minimum-norm SVD steps and backtracking on `|r|^2 / 2`.
/// Infeasible trial points are treated as line-search failures; an infeasible
/// start is an error.
pub fn multi_tangency_solve(problem: &TangencyConstraintProblem, start: &[f64]) -> Result<SolveOutcome> {
    let j = problem.j();
    if j > problem.unknowns() + 1 {
        return Err(Error::InvalidInput(format!(
            "{j} tangencies exceed one past the {} unknowns",
            problem.unknowns()
        )));
    }
    let mut c = start.to_vec();
    let mut r = tangency_residuals(problem, &c)?;
    let mut rn = norm(&r);
    let mut condition = f64::NAN;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && rn >= CONVERGED_RESIDUAL {
        iterations += 1;
        let jac = match jacobian(problem, &c, j) {
            Ok(m) => m,
            Err(_) => break,
        };
        let (step, cond) = linalg::least_squares(&jac, &(-Vector::from_column_slice(&r)));
        condition = cond;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            if let Ok(rt) = tangency_residuals(problem, &trial) {
                let nt = norm(&rt);
                if nt < rn * (1.0 - 1e-4 * alpha) {
                    c = trial;
                    r = rt;
                    rn = nt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if j == 0 {
        condition = 1.0;
    } else if let Ok(jac) = jacobian(problem, &c, j) {
        condition = linalg::least_squares(&jac, &Vector::zeros(j)).1;
    }
    Ok(SolveOutcome {
        coords: c,
        residual_norm: rn,
        converged: rn < CONVERGED_RESIDUAL,
        iterations,
        condition,
    })
}
