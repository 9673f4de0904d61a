//! Grazing-safe first-intersection search along rays.

use super::types::ReflectionEvent;
use crate::error::{Error, Result};
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::linalg::Vector;
use crate::roots;

/// Result of [`first_hit`].
#[derive(Clone, Debug, PartialEq)]
pub enum HitOutcome {
    Hit(ReflectionEvent),
    NoHit,
}

impl HitOutcome {
    pub fn event(self) -> Option<ReflectionEvent> {
        match self {
            HitOutcome::Hit(e) => Some(e),
            HitOutcome::NoHit => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum InstanceHit {
    Transversal(f64),
    Grazing(f64),
}

impl InstanceHit {
    pub(crate) fn t(self) -> f64 {
        match self {
            InstanceHit::Transversal(t) | InstanceHit::Grazing(t) => t,
        }
    }
}

/// Minimizer of `f(t) = R(q + t v)` near the instance, `(t_star, f_star)`.
///
/// Searches `|t - t_c| <= extent` around the closest approach `t_c` to the
/// instance center. Returns `None` when the minimizer is not interior.
pub fn line_minimum(cfg: &BilliardConfig, inst: &ScattererInstance, q: &Vector, v: &Vector) -> Option<(f64, f64)> {
    let c = cfg.instance_center(inst);
    let tc = (&c - q).dot(v);
    let e = cfg.scatterer(inst).extent();
    let (lo, hi) = (tc - e, tc + e);
    let t = if cfg.scatterer(inst).is_quadric() {
        let (a, b, _) = cfg.quadric_along_line(inst, q, v);
        -b / (2.0 * a)
    } else {
        let df = |t: f64| {
            let x = q + v * t;
            let (_, g, h) = cfg.value_grad_hess(inst, &x);
            (g.dot(v), v.dot(&(&h * v)))
        };
        // multiple minima are possible only inside bump supports; take the global
        // one among marched candidates
        let step = march_step(cfg, inst);
        let mut best: Option<(f64, f64)> = None;
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        let ts: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let gs: Vec<f64> = ts.iter().map(|&t| df(t).0).collect();
        for k in 0..n {
            if gs[k] < 0.0 && gs[k + 1] >= 0.0 {
                if let Some(tm) = roots::bracketed_newton(df, ts[k], ts[k + 1], 0.5 * (ts[k] + ts[k + 1]), 1e-16, 100) {
                    let fm = cfg.value(inst, &(q + v * tm));
                    if best.is_none_or(|(_, fb)| fm < fb) {
                        best = Some((tm, fm));
                    }
                }
            }
        }
        best?.0
    };
    if !(t > lo && t < hi) {
        return None;
    }
    Some((t, cfg.value(inst, &(q + v * t))))
}

fn march_step(cfg: &BilliardConfig, inst: &ScattererInstance) -> f64 {
    let mut h = cfg.tau0 / 10.0;
    if let Some(rho) = cfg.scatterer(inst).min_bump_radius() {
        h = h.min(rho / 4.0);
    }
    h
}

/// Earliest intersection of `q + t v`, `t in (lo, hi]`, with one instance.
pub(crate) fn instance_hit(
    cfg: &BilliardConfig,
    inst: &ScattererInstance,
    q: &Vector,
    v: &Vector,
    lo: f64,
    hi: f64,
) -> Option<InstanceHit> {
    let res = cfg.tolerances.newton_residual;
    if cfg.scatterer(inst).is_quadric() {
        let (a, b, c) = cfg.quadric_along_line(inst, q, v);
        let t_star = -b / (2.0 * a);
        if !(t_star > lo && t_star < hi) {
            return None;
        }
        let f_star = cfg.value(inst, &(q + v * t_star));
        if f_star > res {
            return None;
        }
        if f_star >= -res {
            return Some(InstanceHit::Grazing(t_star));
        }
        let (r1, _) = roots::quadratic_roots(a, b, c)?;
        let r1 = r1.min(t_star);
        if r1 <= lo {
            return None;
        }
        return Some(InstanceHit::Transversal(polish_root(cfg, inst, q, v, r1, lo, t_star)));
    }
    let f = |t: f64| cfg.value_grad(inst, &(q + v * t));
    let step = march_step(cfg, inst);
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let ts: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let samples: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let (r, g) = f(t);
            (r, g.dot(v))
        })
        .collect();
    if samples[0].0 < -res {
        // interior start on this instance
        return None;
    }
    for k in 0..n {
        let gk = samples[k].1;
        let (fk1, gk1) = samples[k + 1];
        if fk1 < -res {
            let t = root_in(cfg, inst, q, v, ts[k], ts[k + 1])?;
            return Some(InstanceHit::Transversal(t));
        }
        if gk < 0.0 && gk1 >= 0.0 {
            let df = |t: f64| {
                let (_, g, h) = cfg.value_grad_hess(inst, &(q + v * t));
                (g.dot(v), v.dot(&(&h * v)))
            };
            let tm = roots::bracketed_newton(df, ts[k], ts[k + 1], 0.5 * (ts[k] + ts[k + 1]), 1e-16, 100)?;
            let fm = cfg.value(inst, &(q + v * tm));
            if fm > res {
                continue;
            }
            if fm >= -res {
                return Some(InstanceHit::Grazing(tm));
            }
            let t = root_in(cfg, inst, q, v, ts[k], tm)?;
            return Some(InstanceHit::Transversal(t));
        }
    }
    None
}

fn root_in(cfg: &BilliardConfig, inst: &ScattererInstance, q: &Vector, v: &Vector, a: f64, b: f64) -> Option<f64> {
    let f = |t: f64| {
        let (r, g) = cfg.value_grad(inst, &(q + v * t));
        (r, g.dot(v))
    };
    roots::bracketed_newton(f, a, b, a, 1e-16, 200)
}

/// Newton polish of a transversal root, kept inside `(lo, t_star]`.
fn polish_root(cfg: &BilliardConfig, inst: &ScattererInstance, q: &Vector, v: &Vector, t0: f64, lo: f64, t_star: f64) -> f64 {
    let mut t = t0;
    let (mut r, _) = cfg.value_grad(inst, &(q + v * t));
    for _ in 0..4 {
        let (_, g) = cfg.value_grad(inst, &(q + v * t));
        let d = g.dot(v);
        if d == 0.0 || r == 0.0 {
            break;
        }
        let next = t - r / d;
        if !(next > lo && next <= t_star) {
            break;
        }
        let rn = cfg.value(inst, &(q + v * next));
        if rn.abs() >= r.abs() {
            break;
        }
        t = next;
        r = rn;
    }
    t
}

/// First collision of the ray `q + t v`, `t > t_min`, with any scatterer instance.
pub fn first_hit(cfg: &BilliardConfig, q: &Vector, v: &Vector, t_min: f64) -> Result<HitOutcome> {
    first_hit_from(cfg, q, v, t_min, None)
}

/// [`first_hit`] ignoring one instance (the one the ray departs from; a strictly
/// convex body cannot be hit again by an outgoing ray).
pub(crate) fn first_hit_from(
    cfg: &BilliardConfig,
    q: &Vector,
    v: &Vector,
    t_min: f64,
    exclude: Option<&ScattererInstance>,
) -> Result<HitOutcome> {
    let tol = &cfg.tolerances;
    for inst in cfg.enumerate_instances(q, 0.0) {
        if Some(&inst) == exclude {
            continue;
        }
        let r = cfg.value(&inst, q);
        if r < -tol.on_surface {
            return Err(Error::InvalidStart {
                scatterer: inst.base,
                value: r,
            });
        }
    }
    let t_max = cfg.horizon_bound * (1.0 + 1e-6);
    let chunk = 1.0;
    let mut processed: Vec<ScattererInstance> = Vec::new();
    let mut hits: Vec<(f64, ScattererInstance, InstanceHit)> = Vec::new();
    let mut t0 = t_min.max(0.0);
    while t0 < t_max {
        let t1 = (t0 + chunk).min(t_max);
        for (inst, a, b) in cfg.instances_along_segment(q, v, t0, t1) {
            if Some(&inst) == exclude || processed.contains(&inst) {
                continue;
            }
            if let Some(h) = instance_hit(cfg, &inst, q, v, a.max(t_min), b) {
                hits.push((h.t(), inst.clone(), h));
            }
            processed.push(inst);
        }
        let best = hits.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
        if best + cfg.tau0 / 2.0 <= t1 {
            break;
        }
        t0 = t1;
    }
    hits.retain(|h| h.0 <= t_max);
    if hits.is_empty() {
        return Ok(HitOutcome::NoHit);
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    if hits.len() >= 2 && hits[1].0 - hits[0].0 < cfg.tau0 / 2.0 {
        return Err(Error::MultipleCollision {
            t_first: hits[0].0,
            t_second: hits[1].0,
        });
    }
    let (t, inst, _) = hits.swap_remove(0);
    let q_hit = q + v * t;
    let n = cfg.gradient_direction(&inst, &q_hit)?;
    let cos_phi = -v.dot(&n);
    Ok(HitOutcome::Hit(ReflectionEvent {
        instance: inst,
        t_flight: t,
        q_hit,
        tangency: cos_phi.abs() < tol.tangency_cos,
        cos_phi,
    }))
}
