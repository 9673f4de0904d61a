use super::map::billiard_step;
use super::types::PhasePoint;
use crate::error::{Error, Result};
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::linalg::{self, Matrix, Vector};
use crate::roots;

/// Orthonormal chart on the collision space around a base point.
///
/// Surface coordinates `s` place `q0 + E s` and project it back onto the surface
/// along `n0`; velocity coordinates `w` give `v = normalize(v0 + W w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseChart {
    pub instance: ScattererInstance,
    pub q0: Vector,
    pub n0: Vector,
    pub surface_frame: Vec<Vector>,
    pub v0: Vector,
    pub velocity_frame: Vec<Vector>,
}

impl PhaseChart {
    pub fn at(cfg: &BilliardConfig, x: &PhasePoint) -> Result<Self> {
        let n0 = cfg.unit_normal(&x.instance, &x.q)?;
        Ok(PhaseChart {
            instance: x.instance.clone(),
            q0: x.q.clone(),
            surface_frame: linalg::orthonormal_complement(&n0),
            n0,
            v0: x.v.clone(),
            velocity_frame: linalg::orthonormal_complement(&x.v),
        })
    }

    pub fn dim(&self) -> usize {
        self.surface_frame.len() + self.velocity_frame.len()
    }

    pub fn point(&self, cfg: &BilliardConfig, coords: &[f64]) -> Result<PhasePoint> {
        let m = self.surface_frame.len();
        let mut x = self.q0.clone();
        for (e, s) in self.surface_frame.iter().zip(&coords[..m]) {
            x += e * *s;
        }
        let q = self.project(cfg, &x)?;
        let mut v = self.v0.clone();
        for (w, c) in self.velocity_frame.iter().zip(&coords[m..]) {
            v += w * *c;
        }
        Ok(PhasePoint::new(self.instance.clone(), q, v.normalize()))
    }

    pub fn coords(&self, x: &PhasePoint) -> Vec<f64> {
        let dq = &x.q - &self.q0;
        let c = x.v.dot(&self.v0);
        let s = self.surface_frame.iter().map(|e| e.dot(&dq));
        let w = self.velocity_frame.iter().map(|w| w.dot(&x.v) / c);
        s.chain(w).collect()
    }

    /// Surface point `x + lambda n0` nearest to `x`.
    fn project(&self, cfg: &BilliardConfig, x: &Vector) -> Result<Vector> {
        let inst = &self.instance;
        let scale = cfg.scatterer(inst).extent();
        let f = |l: f64| {
            let (r, g) = cfg.value_grad(inst, &(x + &self.n0 * l));
            (r, g.dot(&self.n0))
        };
        let (r0, _) = f(0.0);
        // R increases along n0 near the surface, so the root lies on the side opposite to the sign of r0
        let (lo, hi) = if r0 > 0.0 { (-scale, 0.0) } else { (0.0, scale) };
        let l = roots::bracketed_newton(f, lo, hi, 0.0, 1e-16, 200).ok_or(Error::NoConvergence {
            iterations: 0,
            residual: r0.abs(),
        })?;
        Ok(x + &self.n0 * l)
    }
}

/// Finite-difference Jacobian of the billiard map between phase charts.
#[derive(Clone, Debug)]
pub struct JacobianReport {
    pub matrix: Matrix,
    pub domain: PhaseChart,
    pub codomain: PhaseChart,
    pub image: PhasePoint,
    pub cos_in: f64,
    pub cos_out: f64,
}

impl JacobianReport {
    /// `|det J| cos(phi(Tx)) / cos(phi(x)) - 1`, zero for an invariant `mu_1`.
    pub fn measure_defect(&self) -> f64 {
        self.matrix.determinant().abs() * self.cos_out / self.cos_in - 1.0
    }
}

/// Central-difference Jacobian of `T` with Richardson extrapolation.
pub fn map_jacobian_fd(cfg: &BilliardConfig, x: &PhasePoint, h: f64) -> Result<JacobianReport> {
    jacobian_with(cfg, x, h, true)
}

/// Plain central differences (no extrapolation), for order checks.
pub fn map_jacobian_central(cfg: &BilliardConfig, x: &PhasePoint, h: f64) -> Result<JacobianReport> {
    jacobian_with(cfg, x, h, false)
}

fn jacobian_with(cfg: &BilliardConfig, x: &PhasePoint, h: f64, richardson: bool) -> Result<JacobianReport> {
    let margin = 10.0 * cfg.tolerances.tangency_cos;
    let domain = PhaseChart::at(cfg, x)?;
    let cos_in = x.v.dot(&domain.n0);
    if cos_in <= margin {
        return Err(Error::StencilCrossing);
    }
    let (image, e) = billiard_step(cfg, x)?;
    if e.cos_phi <= margin {
        return Err(Error::StencilCrossing);
    }
    let codomain = PhaseChart::at(cfg, &image)?;
    let step = |c: &[f64]| -> Result<Vec<f64>> {
        let y = domain.point(cfg, c)?;
        let (ty, ev) = billiard_step(cfg, &y)?;
        if ev.instance != image.instance || ev.tangency || ev.cos_phi <= margin {
            return Err(Error::StencilCrossing);
        }
        Ok(codomain.coords(&ty))
    };
    let n = domain.dim();
    let central = |h: f64| -> Result<Matrix> {
        let mut j = Matrix::zeros(n, n);
        for i in 0..n {
            let mut c = vec![0.0; n];
            c[i] = h;
            let fp = step(&c)?;
            c[i] = -h;
            let fm = step(&c)?;
            for r in 0..n {
                j[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(j)
    };
    let matrix = if richardson {
        let j1 = central(h)?;
        let j2 = central(h / 2.0)?;
        (j2 * 4.0 - j1) / 3.0
    } else {
        central(h)?
    };
    Ok(JacobianReport {
        matrix,
        domain,
        codomain,
        cos_in,
        cos_out: e.cos_phi,
        image,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;
    use crate::geometry::Scatterer;

    fn pair() -> BilliardConfig {
        BilliardConfig::new(
            2,
            vec![
                Scatterer::sphere(0, &[0.0, 0.0], 0.38),
                Scatterer::sphere(1, &[0.5, 0.5], 0.14),
            ],
            2.0,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn chart_reproduces_base() {
        let cfg = pair();
        let inst = ScattererInstance::origin(0, 2);
        let u = vector(&[0.6, 0.8]);
        let q = cfg.radial_surface_point(&inst, &u);
        let x = PhasePoint::new(inst, q, vector(&[0.8, 0.6]));
        let chart = PhaseChart::at(&cfg, &x).unwrap();
        let y = chart.point(&cfg, &[0.0, 0.0]).unwrap();
        assert!(y.distance(&x) < 1e-15);
        let z = chart.point(&cfg, &[0.01, -0.02]).unwrap();
        let c = chart.coords(&z);
        assert!((c[0] - 0.01).abs() < 1e-14 && (c[1] + 0.02).abs() < 1e-14);
        assert!(cfg.value(&z.instance, &z.q).abs() < 1e-14);
    }

    #[test]
    fn period_two_jacobian_preserves_measure() {
        let cfg = pair();
        let inst = ScattererInstance::origin(0, 2);
        let u = vector(&[1.0, 1.0]).normalize();
        let x = PhasePoint::new(inst.clone(), cfg.radial_surface_point(&inst, &u), u);
        let jr = map_jacobian_fd(&cfg, &x, 1e-6).unwrap();
        assert!(jr.measure_defect().abs() < 1e-6, "{}", jr.measure_defect());
    }
}
