use super::hit::line_minimum;
use super::types::{OrientedLine, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::linalg::{self, Vector};
use crate::roots;

/// `Phi(q, v) = (q - (q, v) v, v)`.
pub fn phase_to_line(x: &PhasePoint) -> OrientedLine {
    OrientedLine::through(&x.q, &x.v)
}

/// First intersection of `l` with `target`, carrying the incoming direction.
/// A grazing line returns the tangency point.
pub fn line_to_phase(cfg: &BilliardConfig, l: &OrientedLine, target: &ScattererInstance) -> Result<PhasePoint> {
    let res = cfg.tolerances.newton_residual;
    let (t_star, f_star) = line_minimum(cfg, target, &l.p, &l.v).ok_or(Error::NoMinimum)?;
    if f_star > res {
        return Err(Error::NoIntersection { min_value: f_star });
    }
    let t = if f_star >= -res {
        t_star
    } else {
        let e = cfg.scatterer(target).extent();
        let lo = t_star - 2.0 * e;
        let f = |t: f64| {
            let (r, g) = cfg.value_grad(target, &l.point_at(t));
            (r, g.dot(&l.v))
        };
        roots::bracketed_newton(f, lo, t_star, t_star - 0.5 * e, 1e-16, 200).ok_or(Error::NoConvergence {
            iterations: 200,
            residual: f_star.abs(),
        })?
    };
    Ok(PhasePoint::new(target.clone(), l.point_at(t), l.v.clone()))
}

/// Local coordinates on line space around a base line, `2d - 2` reals.
///
/// `b` moves the direction `v = normalize(v0 + W b)` and `a` the foot point
/// `p = pi_v(p0 + W a)`, with `W` an orthonormal frame of `v0`'s complement.
#[derive(Clone, Debug, PartialEq)]
pub struct LineChart {
    pub p0: Vector,
    pub v0: Vector,
    pub frame: Vec<Vector>,
}

impl LineChart {
    pub fn at(base: &OrientedLine) -> Self {
        LineChart {
            p0: base.p.clone(),
            v0: base.v.clone(),
            frame: linalg::orthonormal_complement(&base.v),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.frame.len()
    }

    pub fn line(&self, coords: &[f64]) -> OrientedLine {
        let m = self.frame.len();
        let mut x = self.p0.clone();
        let mut v = self.v0.clone();
        for (i, w) in self.frame.iter().enumerate() {
            x += w * coords[i];
            v += w * coords[m + i];
        }
        OrientedLine::through(&x, &v)
    }

    /// Inverse of [`LineChart::line`] for lines with `(v, v0) > 0`.
    pub fn coords(&self, l: &OrientedLine) -> Vec<f64> {
        let c = self.v0.dot(&l.v);
        let dp = &l.p - &self.p0;
        let mu = -self.v0.dot(&dp) / c;
        let a = self.frame.iter().map(|w| w.dot(&dp) + mu * w.dot(&l.v));
        let b = self.frame.iter().map(|w| w.dot(&l.v) / c);
        a.chain(b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Scatterer;
    use crate::linalg::vector;

    fn single() -> BilliardConfig {
        BilliardConfig::new(2, vec![Scatterer::sphere(0, &[0.5, 0.5], 0.2)], 2.0, 0.1).unwrap()
    }

    #[test]
    fn foot_point_examples() {
        let inst = ScattererInstance::origin(0, 2);
        let l = phase_to_line(&PhasePoint::new(inst.clone(), vector(&[0.7, 0.5]), vector(&[1.0, 0.0])));
        assert!((l.p - vector(&[0.0, 0.5])).amax() < 1e-15);
        let l = phase_to_line(&PhasePoint::new(inst, vector(&[0.0, 0.5]), vector(&[1.0, 0.0])));
        assert_eq!(l.p, vector(&[0.0, 0.5]));
    }

    #[test]
    fn line_to_phase_examples() {
        let cfg = single();
        let inst = ScattererInstance::origin(0, 2);
        let x = line_to_phase(&cfg, &OrientedLine::through(&vector(&[0.0, 0.5]), &vector(&[1.0, 0.0])), &inst).unwrap();
        assert!((&x.q - vector(&[0.3, 0.5])).amax() < 1e-14);
        let n = cfg.unit_normal(&inst, &x.q).unwrap();
        assert!((-x.v.dot(&n) - 1.0).abs() < 1e-14);

        let g = line_to_phase(&cfg, &OrientedLine::through(&vector(&[0.0, 0.7]), &vector(&[1.0, 0.0])), &inst).unwrap();
        assert!((g.q - vector(&[0.5, 0.7])).amax() < 1e-14);

        let miss = line_to_phase(&cfg, &OrientedLine::through(&vector(&[0.0, 0.9]), &vector(&[1.0, 0.0])), &inst);
        assert!(matches!(miss, Err(Error::NoIntersection { .. })));
    }

    #[test]
    fn chart_round_trip() {
        let base = OrientedLine::through(&vector(&[0.2, 0.4, 0.1]), &vector(&[0.3, -0.2, 0.9]));
        let chart = LineChart::at(&base);
        let c = [0.01, -0.02, 0.03, 0.05];
        let l = chart.line(&c);
        assert!(l.p.dot(&l.v).abs() < 1e-15);
        let back = chart.coords(&l);
        for (a, b) in back.iter().zip(&c) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(chart.line(&[0.0; 4]).distance(&base) < 1e-15);
    }
}
