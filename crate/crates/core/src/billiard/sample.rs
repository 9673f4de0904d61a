use super::map::reflect_velocity;
use super::types::PhasePoint;
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::rng::{self, Rng};

/// Random outgoing phase point on a random base scatterer: radially projected
/// surface point, velocity uniform on the outgoing hemisphere.
pub fn random_phase_point(cfg: &BilliardConfig, rng: &mut Rng) -> PhasePoint {
    let d = cfg.dimension;
    let inst = ScattererInstance::origin(rng::index(rng, cfg.scatterers.len()), d);
    let q = cfg.radial_surface_point(&inst, &rng::unit_vector(rng, d));
    let (_, g) = cfg.value_grad(&inst, &q);
    let n = g.normalize();
    let mut v = rng::unit_vector(rng, d);
    if v.dot(&n) < 0.0 {
        v = reflect_velocity(&v, &n);
    }
    PhasePoint::new(inst, q, v)
}

/// Same as [`random_phase_point`] but rejecting `cos(phi) <= min_cos`.
pub fn random_transversal_point(cfg: &BilliardConfig, rng: &mut Rng, min_cos: f64) -> PhasePoint {
    loop {
        let x = random_phase_point(cfg, rng);
        let (_, g) = cfg.value_grad(&x.instance, &x.q);
        if x.v.dot(&g.normalize()) > min_cos {
            return x;
        }
    }
}
