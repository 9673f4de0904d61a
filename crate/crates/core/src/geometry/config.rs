use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::scatterer::{DerivativeBundle, Scatterer};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::rng;

/// Named numerical tolerances shared by every solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub on_surface: f64,
    pub gradient_floor: f64,
    pub tangency_cos: f64,
    pub newton_residual: f64,
    pub newton_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            on_surface: 1e-10,
            gradient_floor: 1e-8,
            tangency_cos: 1e-7,
            newton_residual: 1e-12,
            newton_max_iter: 50,
        }
    }
}

/// One lattice translate of a base scatterer in the universal cover.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScattererInstance {
    pub base: usize,
    pub shift: Vec<i64>,
}

impl ScattererInstance {
    pub fn new(base: usize, shift: &[i64]) -> Self {
        ScattererInstance {
            base,
            shift: shift.to_vec(),
        }
    }

    pub fn origin(base: usize, d: usize) -> Self {
        ScattererInstance {
            base,
            shift: vec![0; d],
        }
    }
}

impl PartialOrd for ScattererInstance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScattererInstance {
    fn cmp(&self, other: &Self) -> Ordering {
        self.base
            .cmp(&other.base)
            .then_with(|| self.shift.cmp(&other.shift))
    }
}

/// A periodic scatterer configuration on the unit torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilliardConfig {
    pub dimension: usize,
    pub scatterers: Vec<Scatterer>,
    pub horizon_bound: f64,
    pub tau0: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl BilliardConfig {
    pub fn new(dimension: usize, scatterers: Vec<Scatterer>, horizon_bound: f64, tau0: f64) -> Result<Self> {
        let cfg = BilliardConfig {
            dimension,
            scatterers,
            horizon_bound,
            tau0,
            tolerances: Tolerances::default(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Structural validation; assumption checks live in `validate_configuration`.
    pub fn check(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidInput(format!("dimension {} < 2", self.dimension)));
        }
        if self.scatterers.is_empty() {
            return Err(Error::InvalidInput("no scatterers".into()));
        }
        if !(self.horizon_bound > 0.0) || !(self.tau0 > 0.0) {
            return Err(Error::InvalidInput("horizon_bound and tau0 must be positive".into()));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if s.id != i {
                return Err(Error::InvalidInput(format!(
                    "scatterer at position {i} has id {}",
                    s.id
                )));
            }
            s.check(self.dimension)?;
        }
        let t = &self.tolerances;
        if !(t.on_surface > 0.0 && t.gradient_floor > 0.0 && t.tangency_cos > 0.0 && t.newton_residual > 0.0)
            || t.newton_max_iter == 0
        {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn scatterer(&self, inst: &ScattererInstance) -> &Scatterer {
        &self.scatterers[inst.base]
    }

    pub fn instance_center(&self, inst: &ScattererInstance) -> Vector {
        let s = self.scatterer(inst);
        Vector::from_iterator(
            self.dimension,
            s.center.iter().zip(&inst.shift).map(|(c, k)| c + *k as f64),
        )
    }

    fn to_local(inst: &ScattererInstance, x: &Vector) -> Vector {
        Vector::from_iterator(x.len(), x.iter().zip(&inst.shift).map(|(xi, k)| xi - *k as f64))
    }

    pub fn value(&self, inst: &ScattererInstance, x: &Vector) -> f64 {
        self.scatterer(inst).value(&Self::to_local(inst, x))
    }

    pub fn value_grad(&self, inst: &ScattererInstance, x: &Vector) -> (f64, Vector) {
        self.scatterer(inst).value_grad(&Self::to_local(inst, x))
    }

    pub fn value_grad_hess(&self, inst: &ScattererInstance, x: &Vector) -> (f64, Vector, Matrix) {
        self.scatterer(inst).value_grad_hess(&Self::to_local(inst, x))
    }

    pub fn eval(&self, inst: &ScattererInstance, x: &Vector, order: usize) -> Result<DerivativeBundle> {
        self.scatterer(inst).eval(&Self::to_local(inst, x), order)
    }

    /// `R(q + t v)` coefficients for a quadric instance.
    pub fn quadric_along_line(&self, inst: &ScattererInstance, q: &Vector, v: &Vector) -> (f64, f64, f64) {
        self.scatterer(inst).quadric_along_line(&Self::to_local(inst, q), v)
    }

    /// Largest body diameter over all scatterers.
    pub fn max_diameter(&self) -> f64 {
        self.scatterers
            .iter()
            .map(|s| 2.0 * s.extent())
            .fold(0.0, f64::max)
    }

    /// Inward-to-`Q` unit normal `grad R / |grad R|` at a surface point.
    pub fn unit_normal(&self, inst: &ScattererInstance, q: &Vector) -> Result<Vector> {
        let (r, g) = self.value_grad(inst, q);
        if r.abs() >= self.tolerances.on_surface {
            return Err(Error::OffSurface { residual: r.abs() });
        }
        normalize_gradient(&g, self.tolerances.gradient_floor)
    }

    /// Same as [`BilliardConfig::unit_normal`] without the on-surface check.
    pub fn gradient_direction(&self, inst: &ScattererInstance, x: &Vector) -> Result<Vector> {
        let (_, g) = self.value_grad(inst, x);
        normalize_gradient(&g, self.tolerances.gradient_floor)
    }

    /// Every instance whose bounding box overlaps the bounding box of
    /// `B(center, radius)`; a superset of the instances meeting the ball.
    /// Sorted by `(base, shift)`.
    pub fn enumerate_instances(&self, center: &Vector, radius: f64) -> Vec<ScattererInstance> {
        let d = self.dimension;
        let mut out = Vec::new();
        for s in &self.scatterers {
            let e = s.extent();
            let ranges: Vec<(i64, i64)> = (0..d)
                .map(|j| {
                    let lo = center[j] - radius - e - s.center[j];
                    let hi = center[j] + radius + e - s.center[j];
                    // strict overlap: lo < k < hi
                    ((lo.floor() as i64) + 1, (hi.ceil() as i64) - 1)
                })
                .collect();
            if ranges.iter().any(|(a, b)| a > b) {
                continue;
            }
            for shift in lattice_box(&ranges) {
                out.push(ScattererInstance::new(s.id, &shift));
            }
        }
        out.sort();
        out
    }

    /// Instances whose bounding sphere meets the segment `q + t v`, `t in [t0, t1]`,
    /// with the parameter interval where the segment is inside the sphere.
    pub fn instances_along_segment(
        &self,
        q: &Vector,
        v: &Vector,
        t0: f64,
        t1: f64,
    ) -> Vec<(ScattererInstance, f64, f64)> {
        let mid = q + v * (0.5 * (t0 + t1));
        let half = 0.5 * (t1 - t0);
        let mut out = Vec::new();
        for inst in self.enumerate_instances(&mid, half) {
            let e = self.scatterer(&inst).extent();
            let c = self.instance_center(&inst);
            let w = &c - q;
            let tc = w.dot(v);
            let perp2 = (w.norm_squared() - tc * tc).max(0.0);
            if perp2 >= e * e {
                continue;
            }
            let half_chord = (e * e - perp2).sqrt();
            let (a, b) = ((tc - half_chord).max(t0), (tc + half_chord).min(t1));
            if a <= b {
                out.push((inst, tc - half_chord, tc + half_chord));
            }
        }
        out
    }

    /// Surface point of an instance in direction `u` from its center.
    pub fn radial_surface_point(&self, inst: &ScattererInstance, u: &Vector) -> Vector {
        let s = self.scatterer(inst);
        let local = s.radial_surface_point(u);
        Vector::from_iterator(
            self.dimension,
            local.iter().zip(&inst.shift).map(|(x, k)| x + *k as f64),
        )
    }
}

/// All integer vectors in the product of closed ranges.
pub(crate) fn lattice_box(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for &(a, b) in ranges {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (a..=b).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

pub(crate) fn normalize_gradient(g: &Vector, floor: f64) -> Result<Vector> {
    let norm = g.norm();
    if norm < floor {
        return Err(Error::DegenerateGradient { norm });
    }
    Ok(g / norm)
}

/// Minimum over sampled surface points of the smallest Hessian eigenvalue of `R`.
///
/// Directions are drawn uniformly on the sphere and projected radially to the
/// surface. For bump-perturbed scatterers half of the samples are drawn inside
/// the bump caps, where convexity can actually change.
pub fn min_hessian_eigenvalue(s: &Scatterer, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be >= 1".into()));
    }
    let d = s.dim();
    let center = Vector::from_column_slice(&s.center);
    let caps: Vec<(Vector, f64)> = s
        .bumps
        .iter()
        .filter(|b| b.amplitude != 0.0)
        .map(|b| {
            let bc = Vector::from_column_slice(&b.center);
            let dir = (&bc - &center).normalize();
            // angular half-width of the support seen from the center
            let half = (b.radius / (&bc - &center).norm()).min(1.0).asin() * 1.05;
            (dir, half)
        })
        .collect();
    let mut lambda = f64::INFINITY;
    for i in 0..n_samples {
        let mut rng = rng::stream(seed, i as u64);
        let u = if !caps.is_empty() && i % 2 == 1 {
            let (dir, half) = &caps[(i / 2) % caps.len()];
            cap_direction(&mut rng, dir, *half)
        } else {
            rng::unit_vector(&mut rng, d)
        };
        let q = s.radial_surface_point(&u);
        let (_, _, h) = s.value_grad_hess(&q);
        lambda = lambda.min(linalg::min_eigenvalue(&h));
    }
    if !(lambda > 0.0) {
        return Err(Error::ConvexityViolation {
            min_eigenvalue: lambda,
        });
    }
    Ok(lambda)
}

/// Random unit vector within angle `half` of `dir`.
fn cap_direction(rng: &mut rng::Rng, dir: &Vector, half: f64) -> Vector {
    let d = dir.len();
    let t = rng::unit_vector(rng, d);
    let perp = linalg::project_orthogonal(&t, dir);
    let pn = perp.norm();
    if pn < 1e-12 {
        return dir.clone();
    }
    let angle = half * rng::uniform(rng, 0.0, 1.0).powf(1.0 / (d as f64 - 1.0));
    dir * angle.cos() + perp / pn * angle.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::scatterer::Bump;
    use crate::linalg::vector;

    fn single_sphere() -> BilliardConfig {
        BilliardConfig::new(2, vec![Scatterer::sphere(0, &[0.5, 0.5], 0.2)], 2.0, 0.1).unwrap()
    }

    #[test]
    fn normal_points_out_of_body() {
        let cfg = single_sphere();
        let inst = ScattererInstance::origin(0, 2);
        let n = cfg.unit_normal(&inst, &vector(&[0.7, 0.5])).unwrap();
        assert!((n[0] - 1.0).abs() < 1e-15 && n[1].abs() < 1e-15);
        let n = cfg.unit_normal(&inst, &vector(&[0.5, 0.3])).unwrap();
        assert!(n[0].abs() < 1e-15 && (n[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn off_surface_normal_is_rejected() {
        let cfg = single_sphere();
        let inst = ScattererInstance::origin(0, 2);
        // R = 0.1 at distance sqrt(0.14) from the center
        let x = vector(&[0.5 + 0.14f64.sqrt(), 0.5]);
        assert!(matches!(cfg.unit_normal(&inst, &x), Err(Error::OffSurface { .. })));
    }

    #[test]
    fn enumerate_examples() {
        let cfg = single_sphere();
        let c = vector(&[0.5, 0.5]);
        assert_eq!(cfg.enumerate_instances(&c, 0.25), vec![ScattererInstance::new(0, &[0, 0])]);
        let all = cfg.enumerate_instances(&c, 1.0);
        assert_eq!(all.len(), 9);
        for (inst, (i, j)) in all.iter().zip((-1..=1).flat_map(|i| (-1..=1).map(move |j| (i, j)))) {
            assert_eq!(inst.shift, vec![i, j]);
        }
        assert!(cfg.enumerate_instances(&vector(&[0.05, 0.05]), 0.01).is_empty());
    }

    #[test]
    fn lambda0_examples() {
        let s = Scatterer::sphere(0, &[0.5, 0.5], 0.2);
        assert_eq!(min_hessian_eigenvalue(&s, 50, 1).unwrap(), 2.0);
        let e = Scatterer::ellipsoid(0, &[0.5, 0.5], &[0.3, 0.2]);
        assert!((min_hessian_eigenvalue(&e, 50, 1).unwrap() - 2.0 / 0.09).abs() < 1e-9);
    }

    #[test]
    fn lambda0_of_bumped_sphere_matches_dense_sampling() {
        let s = Scatterer::sphere(0, &[0.5, 0.5], 0.2).with_bump(Bump {
            center: vec![0.7, 0.5],
            radius: 0.05,
            amplitude: 2e-6,
        });
        let est = min_hessian_eigenvalue(&s, 200, 3).unwrap();
        let dense = min_hessian_eigenvalue(&s, 2000, 4).unwrap();
        assert!((est - 2.0).abs() < 0.2);
        assert!((est - dense).abs() / dense < 0.1);
        assert!(est >= dense - 1e-9 || (est - dense).abs() < 0.05 * dense);
    }

    #[test]
    fn strong_inward_bump_breaks_convexity() {
        let s = Scatterer::sphere(0, &[0.5, 0.5], 0.2).with_bump(Bump {
            center: vec![0.7, 0.5],
            radius: 0.05,
            amplitude: -5e-2,
        });
        assert!(matches!(
            min_hessian_eigenvalue(&s, 400, 3),
            Err(Error::ConvexityViolation { .. })
        ));
    }
}
