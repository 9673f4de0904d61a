//! Tangent lines: the discriminant system `R = 0`, `dR/dt = 0` along a line.

use rayon::prelude::*;
use serde::Serialize;

use crate::billiard::{line_minimum, LineChart, OrientedLine, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::linalg::{self, Matrix, Vector};
use crate::rng;

/// A line tangent to one scatterer instance.
#[derive(Clone, Debug, PartialEq)]
pub struct TangencySolution {
    pub instance: ScattererInstance,
    pub line: OrientedLine,
    pub t_star: f64,
    pub q_star: Vector,
    /// `(|R(q*)|, |(grad R(q*), v)|)`.
    pub residuals: (f64, f64),
    pub iterations: usize,
}

impl TangencySolution {
    /// The grazing phase point `(q*, v)`.
    pub fn phase_point(&self) -> PhasePoint {
        PhasePoint::new(self.instance.clone(), self.q_star.clone(), self.line.v.clone())
    }

    /// Second derivative of `R` along the line at the tangency point.
    pub fn curvature_along_line(&self, cfg: &BilliardConfig) -> f64 {
        let (_, _, h) = cfg.value_grad_hess(&self.instance, &self.q_star);
        self.line.v.dot(&(&h * &self.line.v))
    }
}

/// Row of the tangency-sample CSV.
#[derive(Clone, Debug, Serialize)]
pub struct TangencyRow {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub t_star: f64,
    pub res_f: f64,
    pub res_df: f64,
}

impl From<&TangencySolution> for TangencyRow {
    fn from(s: &TangencySolution) -> Self {
        TangencyRow {
            p: s.line.p.iter().copied().collect(),
            v: s.line.v.iter().copied().collect(),
            t_star: s.t_star,
            res_f: s.residuals.0,
            res_df: s.residuals.1,
        }
    }
}

/// `F_bar = min_t R(p + t v)` and its minimizer. Negative for crossing lines,
/// zero for tangent lines, positive for misses.
pub fn line_tangency_value(cfg: &BilliardConfig, inst: &ScattererInstance, l: &OrientedLine) -> Result<(f64, f64)> {
    line_minimum(cfg, inst, &l.p, &l.v)
        .map(|(t, f)| (f, t))
        .ok_or(Error::NoMinimum)
}

/// Newton on the discriminant system in `(s, t)`: the line is translated along
/// `u`, the direction of `grad R` at the starting minimizer projected to `v`'s
/// complement; all other line coordinates stay frozen.
pub fn solve_tangent_line(cfg: &BilliardConfig, inst: &ScattererInstance, l0: &OrientedLine) -> Result<TangencySolution> {
    let tol = &cfg.tolerances;
    let v = &l0.v;
    let (_, mut t) = line_tangency_value(cfg, inst, l0)?;
    let (_, g0) = cfg.value_grad(inst, &l0.point_at(t));
    let u = linalg::project_orthogonal(&g0, v);
    let un = u.norm();
    if un < tol.gradient_floor {
        return Err(Error::DegenerateGradient { norm: un });
    }
    let u = u / un;
    let step_cap = 0.5 * cfg.scatterer(inst).extent();
    let mut s = 0.0;
    let eval = |s: f64, t: f64| {
        let x = &l0.p + &u * s + v * t;
        cfg.value_grad_hess(inst, &x)
    };
    for it in 0..=tol.newton_max_iter {
        let (r, g, h) = eval(s, t);
        let dr = g.dot(v);
        if r.abs() < tol.newton_residual && dr.abs() < tol.newton_residual {
            let p = &l0.p + &u * s;
            let line = OrientedLine::through(&p, v);
            // `through` only removes a component along v; keep t consistent with the new foot point
            let t_star = t + (&p - &line.p).dot(v);
            return Ok(TangencySolution {
                instance: inst.clone(),
                q_star: line.point_at(t_star),
                line,
                t_star,
                residuals: (r.abs(), dr.abs()),
                iterations: it,
            });
        }
        if it == tol.newton_max_iter {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: r.abs().max(dr.abs()),
            });
        }
        let hv = &h * v;
        let jac = Matrix::from_row_slice(2, 2, &[g.dot(&u), dr, hv.dot(&u), hv.dot(v)]);
        let rhs = Vector::from_vec(vec![-r, -dr]);
        let delta = jac.lu().solve(&rhs).ok_or(Error::NoConvergence {
            iterations: it,
            residual: r.abs(),
        })?;
        let scale = (delta.amax() / step_cap).max(1.0);
        s += delta[0] / scale;
        t += delta[1] / scale;
    }
    unreachable!()
}

fn solve_from(cfg: &BilliardConfig, inst: &ScattererInstance, rng: &mut rng::Rng) -> Result<TangencySolution> {
    let d = cfg.dimension;
    let v = rng::unit_vector(rng, d);
    let mut u = linalg::project_orthogonal(&rng::unit_vector(rng, d), &v);
    while u.norm() < 1e-6 {
        u = linalg::project_orthogonal(&rng::unit_vector(rng, d), &v);
    }
    let u = u.normalize();
    let c = cfg.instance_center(inst);
    let p = linalg::project_orthogonal(&c, &v) + u * cfg.scatterer(inst).extent();
    solve_tangent_line(cfg, inst, &OrientedLine { p, v })
}

/// `count` tangent lines with random directions and random contact points.
pub fn sample_tangency_set(
    cfg: &BilliardConfig,
    inst: &ScattererInstance,
    count: usize,
    seed: u64,
) -> Result<Vec<TangencySolution>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let base = rng::mix(seed, i as u64);
            let mut last = Error::NoMinimum;
            for attempt in 0..16 {
                match solve_from(cfg, inst, &mut rng::stream(base, attempt)) {
                    Ok(s) => return Ok(s),
                    Err(e) => last = e,
                }
            }
            Err(last)
        })
        .collect()
}

/// Tangent lines obtained by projecting random lines within `radius` (in the
/// line chart of `base`) back onto the tangency set.
pub fn sample_tangency_near(
    cfg: &BilliardConfig,
    base: &TangencySolution,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<TangencySolution>> {
    let chart = LineChart::at(&base.line);
    let dim = chart.dim();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let c = rng::in_ball(&mut r, &vec![0.0; dim], radius);
            solve_tangent_line(cfg, &base.instance, &chart.line(&c))
        })
        .collect()
}

/// Descending eigenvalues of the sample covariance of `points`.
pub fn pca_spectrum(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len() as f64;
    let dim = points[0].len();
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / n;
        }
    }
    let mut cov = Matrix::zeros(dim, dim);
    for p in points {
        let y = Vector::from_iterator(dim, p.iter().zip(&mean).map(|(x, m)| x - m));
        cov += &y * y.transpose() / n;
    }
    linalg::sorted_eigen(&cov).0
}

/// Number of dominant directions: the count before the largest consecutive
/// eigenvalue ratio, together with that ratio.
pub fn spectral_dimension(spectrum: &[f64]) -> (usize, f64) {
    let mut best = (spectrum.len(), 1.0);
    for k in 0..spectrum.len() - 1 {
        let ratio = spectrum[k] / spectrum[k + 1].max(f64::MIN_POSITIVE);
        if ratio > best.1 {
            best = (k + 1, ratio);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Scatterer;
    use crate::linalg::vector;

    fn single() -> BilliardConfig {
        BilliardConfig::new(2, vec![Scatterer::sphere(0, &[0.5, 0.5], 0.2)], 2.0, 0.1).unwrap()
    }

    fn vertical(x0: f64) -> OrientedLine {
        OrientedLine::through(&vector(&[x0, 0.0]), &vector(&[0.0, 1.0]))
    }

    #[test]
    fn tangency_value_examples() {
        let cfg = single();
        let inst = ScattererInstance::origin(0, 2);
        assert!(line_tangency_value(&cfg, &inst, &vertical(0.3)).unwrap().0.abs() < 1e-15);
        assert!((line_tangency_value(&cfg, &inst, &vertical(0.5)).unwrap().0 + 0.04).abs() < 1e-15);
        assert!((line_tangency_value(&cfg, &inst, &vertical(0.8)).unwrap().0 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn miss_line_converges_to_tangent() {
        let cfg = single();
        let inst = ScattererInstance::origin(0, 2);
        let s = solve_tangent_line(&cfg, &inst, &vertical(0.8)).unwrap();
        assert!((s.line.p[0] - 0.7).abs() < 1e-12);
        assert!(s.residuals.0 < 1e-12 && s.residuals.1 < 1e-12);
        let again = solve_tangent_line(&cfg, &inst, &s.line).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.line, s.line);
    }

    #[test]
    fn sampled_lines_are_at_distance_r() {
        let cfg = single();
        let inst = ScattererInstance::origin(0, 2);
        let c = vector(&[0.5, 0.5]);
        let sols = sample_tangency_set(&cfg, &inst, 200, 7).unwrap();
        for s in &sols {
            let dist = linalg::project_orthogonal(&(&c - &s.line.p), &s.line.v).norm();
            assert!((dist - 0.2).abs() < 1e-10);
        }
        assert!(sample_tangency_set(&cfg, &inst, 0, 7).unwrap().is_empty());
    }

    #[test]
    fn spectral_dimension_of_a_plane() {
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 0.91).cos();
                vec![a, b, 1e-4 * a * b]
            })
            .collect();
        let (k, gap) = spectral_dimension(&pca_spectrum(&pts));
        assert_eq!(k, 2);
        assert!(gap > 100.0);
    }
}
