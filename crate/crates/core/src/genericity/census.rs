//! Random searches for trajectories with many tangencies.

use rayon::prelude::*;
use serde::Serialize;

use super::problem::{multi_tangency_solve, EventKind, RealizedEvent, TangencyConstraintProblem};
use crate::billiard::{first_hit_from, line_minimum, random_transversal_point, reflect_velocity, HitOutcome, OrientedLine, TrajectoryRecord};
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::linalg::{self, Vector};
use crate::rng::{self, Rng};
use crate::singularity::solve_tangent_line;
use crate::stats::median;

/// Longest combinatorial type the census samples.
pub const MAX_TYPE_LENGTH: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusRow {
    pub j: usize,
    pub trials: usize,
    pub converged: usize,
    pub best_residual: f64,
    pub median_iters: f64,
}

/// A converged (or best) trial, enough to reproduce the trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusWitness {
    pub j: usize,
    pub trial: usize,
    pub events: Vec<(ScattererInstance, EventKind)>,
    pub line: OrientedLine,
    pub residual_norm: f64,
    pub condition: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Census {
    pub rows: Vec<CensusRow>,
    /// Every converged trial, plus the best trial of rows without one.
    pub witnesses: Vec<CensusWitness>,
}

struct TrialResult {
    witness: CensusWitness,
    iterations: usize,
}

fn tangent_start(cfg: &BilliardConfig, r: &mut Rng) -> Option<(ScattererInstance, OrientedLine)> {
    let d = cfg.dimension;
    let inst = ScattererInstance::origin(rng::index(r, cfg.scatterers.len()), d);
    let v = rng::unit_vector(r, d);
    let u = linalg::project_orthogonal(&rng::unit_vector(r, d), &v);
    if u.norm() < 1e-6 {
        return None;
    }
    let p = linalg::project_orthogonal(&cfg.instance_center(&inst), &v) + u.normalize() * cfg.scatterer(&inst).extent();
    let sol = solve_tangent_line(cfg, &inst, &OrientedLine { p, v }).ok()?;
    Some((inst, sol.line))
}

fn reflecting_start(cfg: &BilliardConfig, r: &mut Rng) -> Option<(ScattererInstance, OrientedLine)> {
    let x = random_transversal_point(cfg, r, 0.2);
    let n = cfg.gradient_direction(&x.instance, &x.q).ok()?;
    let v_in = reflect_velocity(&x.v, &n);
    Some((x.instance.clone(), OrientedLine::through(&(&x.q - &v_in), &v_in)))
}

/// Instance the ray passes closest to (in `F_bar / |grad R|`) before it is
/// blocked, skipping translates of the scatterers in `grazed`: a straight line
/// tangent to two translates of one body runs along their lattice vector and
/// then grazes every further translate for free.
fn nearest_pass(cfg: &BilliardConfig, q: &Vector, v: &Vector, prev: &ScattererInstance, grazed: &[usize]) -> Option<ScattererInstance> {
    let t_block = match first_hit_from(cfg, q, v, 0.0, Some(prev)).ok()? {
        HitOutcome::Hit(e) => e.t_flight,
        HitOutcome::NoHit => cfg.horizon_bound,
    };
    let reach = cfg.scatterers.iter().map(|s| s.extent()).fold(0.0, f64::max);
    let mid = q + v * (0.5 * t_block);
    let mut best: Option<(f64, ScattererInstance)> = None;
    for inst in cfg.enumerate_instances(&mid, 0.5 * t_block + reach) {
        if inst == *prev || grazed.contains(&inst.base) {
            continue;
        }
        let Some((t, f)) = line_minimum(cfg, &inst, q, v) else {
            continue;
        };
        if t <= 0.0 || t > t_block + 1e-9 {
            continue;
        }
        let g = cfg.value_grad(&inst, &(q + v * t)).1.norm();
        let score = f.abs() / g;
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, inst));
        }
    }
    best.map(|(_, i)| i)
}

fn tangency_positions(r: &mut Rng, len: usize, j: usize) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        idx.swap(i, rng::index(r, i + 1));
    }
    let mut marks = vec![false; len];
    for &i in &idx[..j] {
        marks[i] = true;
    }
    marks
}

/// Builds a random type event by event along a candidate trajectory, solving
/// after each added tangency so later events are chosen along a trajectory
/// that already satisfies the earlier constraints.
fn trial(cfg: &BilliardConfig, j: usize, index: usize, r: &mut Rng) -> Option<TrialResult> {
    let len = if j >= MAX_TYPE_LENGTH { j } else { j.max(1) + rng::index(r, MAX_TYPE_LENGTH - j.max(1) + 1) };
    let marks = tangency_positions(r, len, j);
    let (inst0, line) = if marks[0] { tangent_start(cfg, r)? } else { reflecting_start(cfg, r)? };
    let kind = |m: bool| if m { EventKind::Tangency } else { EventKind::Reflection };
    let mut problem = TangencyConstraintProblem::new(cfg, vec![(inst0, kind(marks[0]))], &line);
    let mut coords = vec![0.0; problem.unknowns()];
    let mut iterations = 0;
    for &m in &marks[1..] {
        let realized: Vec<RealizedEvent> = problem.realize(&coords).ok()?;
        let last = realized.last()?;
        let next = if m {
            // bases grazed along the current straight run
            let run = realized.iter().rev().take_while(|e| e.kind == EventKind::Tangency).map(|e| e.instance.base);
            let grazed: Vec<usize> = run.collect();
            nearest_pass(cfg, &last.q, &last.v, &last.instance, &grazed)?
        } else {
            match first_hit_from(cfg, &last.q, &last.v, 0.0, Some(&last.instance)).ok()? {
                HitOutcome::Hit(e) if !e.tangency => e.instance,
                _ => return None,
            }
        };
        problem.events.push((next, kind(m)));
        if m {
            let out = multi_tangency_solve(&problem, &coords).ok()?;
            iterations += out.iterations;
            coords = out.coords;
        }
    }
    let out = multi_tangency_solve(&problem, &coords).ok()?;
    iterations += out.iterations;
    Some(TrialResult {
        witness: CensusWitness {
            j,
            trial: index,
            line: problem.chart.line(&out.coords),
            events: problem.events,
            residual_norm: out.residual_norm,
            condition: out.condition,
            converged: out.converged,
        },
        iterations,
    })
}

/// One row per `j = 1..=j_max`, each aggregating `trials` seeded trials.
pub fn tangency_census(cfg: &BilliardConfig, j_max: usize, trials: usize, seed: u64) -> Census {
    let mut rows = Vec::new();
    let mut witnesses = Vec::new();
    if trials == 0 {
        return Census { rows, witnesses };
    }
    for j in 1..=j_max {
        let row_seed = rng::mix(seed, j as u64);
        let results: Vec<Option<TrialResult>> = (0..trials)
            .into_par_iter()
            .map(|i| trial(cfg, j, i, &mut rng::stream(row_seed, i as u64)))
            .collect();
        let done: Vec<&TrialResult> = results.iter().flatten().collect();
        let converged = done.iter().filter(|t| t.witness.converged).count();
        let best = done.iter().min_by(|a, b| a.witness.residual_norm.total_cmp(&b.witness.residual_norm));
        let iters: Vec<f64> = done.iter().map(|t| t.iterations as f64).collect();
        rows.push(CensusRow {
            j,
            trials,
            converged,
            best_residual: best.map_or(f64::INFINITY, |t| t.witness.residual_norm),
            median_iters: if iters.is_empty() { f64::NAN } else { median(&iters) },
        });
        if converged > 0 {
            witnesses.extend(done.iter().filter(|t| t.witness.converged).map(|t| t.witness.clone()));
        } else if let Some(b) = best {
            witnesses.push(b.witness.clone());
        }
    }
    Census { rows, witnesses }
}

/// Events with `|cos phi| <= tol`.
pub fn count_near_tangencies(record: &TrajectoryRecord, tol: f64) -> usize {
    record.events.iter().filter(|e| e.cos_phi.abs() <= tol).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::billiard::{billiard_map_n, PhasePoint};
    use crate::geometry::Scatterer;
    use crate::linalg::vector;

    fn pair() -> BilliardConfig {
        BilliardConfig::new(
            2,
            vec![Scatterer::sphere(0, &[0.0, 0.0], 0.38), Scatterer::sphere(1, &[0.5, 0.5], 0.14)],
            2.0,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn census_rows_in_the_plane() {
        let cfg = pair();
        let c = tangency_census(&cfg, 3, 40, 1);
        assert_eq!(c.rows.len(), 3);
        assert!(c.rows[1].converged >= 1);
        assert_eq!(c.rows[2].converged, 0);
        assert!(c.rows.iter().all(|r| r.converged <= r.trials && r.best_residual >= 0.0));
        assert_eq!(c, tangency_census(&cfg, 3, 40, 1));
        assert!(tangency_census(&cfg, 3, 0, 1).rows.is_empty());
    }

    #[test]
    fn near_tangency_counts() {
        let cfg = pair();
        let u = vector(&[1.0, 1.0]).normalize();
        let x = PhasePoint::new(ScattererInstance::origin(0, 2), &u * 0.38, u.clone());
        let rec = billiard_map_n(&cfg, &x, 6, false).unwrap();
        assert_eq!(count_near_tangencies(&rec, 0.999), 0);
        assert_eq!(count_near_tangencies(&rec, 1.0), rec.events.len());
        let counts: Vec<usize> = [0.0, 0.3, 0.7, 1.0].iter().map(|t| count_near_tangencies(&rec, *t)).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }
}
