//! Near-tangency charts `(a, upsilon, b)` with `tau = -F_bar = upsilon^2`, and the
//! phantom continuation of the reflection to `upsilon < 0`.

use super::tangency::TangencySolution;
use crate::billiard::{line_minimum, reflect_velocity, LineChart, OrientedLine};
use crate::error::{Error, Result};
use crate::geometry::{min_hessian_eigenvalue, BilliardConfig};
use crate::linalg::{self, Matrix, Vector};
use crate::roots;
use crate::stats::{linear_fit, ScalingReport};

/// Chart around a tangent line.
///
/// Coordinates are `a` (`d - 2` slice offsets), `upsilon`, and `b` (`d - 1`
/// direction offsets). The direction is `normalize(v0 + W b)`; the slice frame
/// and the normal are transported to the plane orthogonal to it, and the line is
/// pushed along `-n` until `F_bar = -upsilon^2`.
#[derive(Clone, Debug)]
pub struct QuasiRegularChart {
    pub base: TangencySolution,
    pub n0: Vector,
    pub slice_frame: Vec<Vector>,
    pub velocity_frame: Vec<Vector>,
    pub validity_radius: f64,
}

impl QuasiRegularChart {
    pub fn new(cfg: &BilliardConfig, base: &TangencySolution) -> Result<Self> {
        let n0 = cfg.gradient_direction(&base.instance, &base.q_star)?;
        let v0 = &base.line.v;
        let n0 = linalg::project_orthogonal(&n0, v0).normalize();
        let slice_frame = linalg::orthonormal_complement(&n0)
            .into_iter()
            .map(|e| linalg::project_orthogonal(&e, v0))
            .collect::<Vec<_>>();
        let slice_frame = independent_subset(&slice_frame, &[v0.clone(), n0.clone()], cfg.dimension - 2);
        let lambda0 = min_hessian_eigenvalue(cfg.scatterer(&base.instance), 256, 0)?;
        Ok(QuasiRegularChart {
            base: base.clone(),
            velocity_frame: linalg::orthonormal_complement(v0),
            slice_frame,
            n0,
            validity_radius: (lambda0 / 2.0).min(0.1),
        })
    }

    pub fn dim(&self) -> usize {
        self.slice_frame.len() + 1 + self.velocity_frame.len()
    }

    /// Index of the `upsilon` coordinate.
    pub fn upsilon_index(&self) -> usize {
        self.slice_frame.len()
    }

    fn check(&self, coords: &[f64]) -> Result<()> {
        let r = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if r > self.validity_radius {
            return Err(Error::OutOfChart {
                radius: self.validity_radius,
                value: r,
            });
        }
        Ok(())
    }

    /// The line with chart coordinates `coords` (depends on `upsilon^2` only).
    pub fn line(&self, cfg: &BilliardConfig, coords: &[f64]) -> Result<OrientedLine> {
        self.check(coords)?;
        let k = self.slice_frame.len();
        let ups = coords[k];
        let v0 = &self.base.line.v;
        let mut v = v0.clone();
        for (w, b) in self.velocity_frame.iter().zip(&coords[k + 1..]) {
            v += w * *b;
        }
        let v = v.normalize();
        let mut moved: Vec<Vector> = self.slice_frame.clone();
        moved.push(self.n0.clone());
        let frame = linalg::gram_schmidt(&moved, std::slice::from_ref(&v));
        let n_v = &frame[k];
        let mut x = linalg::project_orthogonal(&self.base.line.p, &v);
        for (e, a) in frame[..k].iter().zip(coords) {
            x += e * *a;
        }
        let inst = &self.base.instance;
        let target = -ups * ups;
        let fbar = |sigma: f64| -> Result<(f64, f64)> {
            let p = &x - n_v * sigma;
            let (t, f) = line_minimum(cfg, inst, &p, &v).ok_or(Error::NoMinimum)?;
            let (_, g) = cfg.value_grad(inst, &(&p + &v * t));
            Ok((f - target, -g.dot(n_v)))
        };
        let (f0, df0) = fbar(0.0)?;
        let mut sigma = -f0 / df0;
        for _ in 0..cfg.tolerances.newton_max_iter {
            let (f, df) = fbar(sigma)?;
            let step = f / df;
            sigma -= step;
            if step.abs() <= 1e-17 + 1e-15 * sigma.abs() {
                break;
            }
        }
        Ok(OrientedLine::through(&(&x - n_v * sigma), &v))
    }

    /// `tau = -F_bar` of a line.
    pub fn tau(&self, cfg: &BilliardConfig, l: &OrientedLine) -> Result<f64> {
        line_minimum(cfg, &self.base.instance, &l.p, &l.v)
            .map(|(_, f)| -f)
            .ok_or(Error::NoMinimum)
    }

    pub fn coords_at(&self, upsilon: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        c[self.upsilon_index()] = upsilon;
        c
    }
}

fn independent_subset(candidates: &[Vector], against: &[Vector], k: usize) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(k);
    for c in candidates {
        if out.len() == k {
            break;
        }
        let mut e = c.clone();
        for b in against.iter().chain(out.iter()) {
            let p = b.dot(&e);
            e -= b * p;
        }
        if e.norm() > 1e-8 {
            out.push(e.normalize());
        }
    }
    out
}

/// Reflected line at chart coordinates `coords`. For `upsilon > 0` this is the
/// true reflection at the entry point; for `upsilon < 0` the reflection at the
/// exit point, which continues the entry branch smoothly through `upsilon = 0`.
pub fn continued_reflection(cfg: &BilliardConfig, chart: &QuasiRegularChart, coords: &[f64]) -> Result<OrientedLine> {
    let l = chart.line(cfg, coords)?;
    let ups = coords[chart.upsilon_index()];
    if ups == 0.0 {
        return Ok(l);
    }
    let inst = &chart.base.instance;
    let (t_star, f_star) = line_minimum(cfg, inst, &l.p, &l.v).ok_or(Error::ContinuationUnavailable { upsilon: ups })?;
    if f_star >= 0.0 {
        // rounding at tiny |upsilon|: the chord has collapsed to the tangency point
        return Ok(l);
    }
    let t = if cfg.scatterer(inst).is_quadric() {
        let (a, b, c) = cfg.quadric_along_line(inst, &l.p, &l.v);
        let (r1, r2) = roots::quadratic_roots(a, b, c).ok_or(Error::ContinuationUnavailable { upsilon: ups })?;
        if ups > 0.0 {
            r1
        } else {
            r2
        }
    } else {
        let e = 2.0 * cfg.scatterer(inst).extent();
        let f = |t: f64| {
            let (r, g) = cfg.value_grad(inst, &l.point_at(t));
            (r, g.dot(&l.v))
        };
        let (lo, hi) = if ups > 0.0 { (t_star - e, t_star) } else { (t_star, t_star + e) };
        roots::bracketed_newton(f, lo, hi, 0.5 * (lo + hi), 1e-16, 200)
            .ok_or(Error::ContinuationUnavailable { upsilon: ups })?
    };
    let q = l.point_at(t);
    let n = cfg.gradient_direction(inst, &q)?;
    Ok(OrientedLine::through(&q, &reflect_velocity(&l.v, &n)))
}

/// Which variable the transverse chart coordinate is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlowupChart {
    /// `tau`: the derivative blows up like `tau^{-1/2}`.
    Tau,
    /// `upsilon = sqrt(tau)`: the derivative stays bounded.
    Upsilon,
}

/// Largest singular value of the derivative of `coords -> reflected line` (in
/// line-chart coordinates around the base line) at each `tau` of the grid, and
/// its log-log slope against `tau` (or `upsilon` for [`BlowupChart::Upsilon`]).
pub fn derivative_blowup_exponent(
    cfg: &BilliardConfig,
    chart: &QuasiRegularChart,
    tau_grid: &[f64],
    kind: BlowupChart,
) -> Result<ScalingReport> {
    if tau_grid.len() < 8 || tau_grid.iter().any(|t| !(*t >= 1e-7 * (1.0 - 1e-9) && *t <= 1e-3 * (1.0 + 1e-9))) {
        return Err(Error::InvalidInput("tau grid needs >= 8 points in [1e-7, 1e-3]".into()));
    }
    let out_chart = LineChart::at(&chart.base.line);
    let k = chart.upsilon_index();
    let n = chart.dim();
    let mut norms = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let ups = tau.sqrt();
        let base = chart.coords_at(ups);
        // the transverse coordinate is perturbed in the chart's own variable
        let at = |c: &[f64], delta: f64| -> Result<Vec<f64>> {
            let mut c = c.to_vec();
            c[k] = match kind {
                BlowupChart::Tau => (tau + delta).sqrt(),
                BlowupChart::Upsilon => ups + delta,
            };
            let l = continued_reflection(cfg, chart, &c)?;
            Ok(out_chart.coords(&l))
        };
        let central = |scale: f64| -> Result<Matrix> {
            let mut j = Matrix::zeros(n, n);
            for i in 0..n {
                let h = if i == k {
                    scale
                        * match kind {
                            BlowupChart::Tau => 0.25 * tau,
                            BlowupChart::Upsilon => 0.25 * ups,
                        }
                } else {
                    scale * 1e-6
                };
                let (fp, fm) = if i == k {
                    (at(&base, h)?, at(&base, -h)?)
                } else {
                    let mut cp = base.clone();
                    cp[i] += h;
                    let mut cm = base.clone();
                    cm[i] -= h;
                    (at(&cp, 0.0)?, at(&cm, 0.0)?)
                };
                for r in 0..n {
                    j[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
                }
            }
            Ok(j)
        };
        let j1 = central(1.0)?;
        let j2 = central(0.5)?;
        let j = (j2 * 4.0 - j1) / 3.0;
        norms.push(linalg::largest_singular_value(&j));
    }
    let xs: Vec<f64> = match kind {
        BlowupChart::Tau => tau_grid.to_vec(),
        BlowupChart::Upsilon => tau_grid.iter().map(|t| t.sqrt()).collect(),
    };
    let fit = linear_fit(
        &xs.iter().map(|x| x.ln()).collect::<Vec<_>>(),
        &norms.iter().map(|y| y.ln()).collect::<Vec<_>>(),
        &vec![1.0; xs.len()],
    );
    Ok(ScalingReport {
        deltas: xs,
        estimates: norms,
        ci: vec![0.0; tau_grid.len()],
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        n_samples: tau_grid.len(),
        seed: 0,
        degenerate: false,
    })
}
