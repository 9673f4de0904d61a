use super::hit::{first_hit_from, HitOutcome};
use super::types::{PhasePoint, ReflectionEvent, Termination, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::geometry::BilliardConfig;
use crate::linalg::Vector;

/// Specular reflection `v - 2 (v, n) n`.
pub fn reflect_velocity(v: &Vector, n: &Vector) -> Vector {
    v - n * (2.0 * v.dot(n))
}

/// Time-reversal involution `(q, v) -> (q, -v + 2 (v, n) n)`.
pub fn involution(cfg: &BilliardConfig, x: &PhasePoint) -> Result<PhasePoint> {
    let n = cfg.unit_normal(&x.instance, &x.q)?;
    Ok(PhasePoint::new(x.instance.clone(), x.q.clone(), -reflect_velocity(&x.v, &n)))
}

/// One application of the billiard map. Tangent hits pass straight through.
pub fn billiard_step(cfg: &BilliardConfig, x: &PhasePoint) -> Result<(PhasePoint, ReflectionEvent)> {
    let e = match first_hit_from(cfg, &x.q, &x.v, 0.0, Some(&x.instance))? {
        HitOutcome::Hit(e) => e,
        HitOutcome::NoHit => return Err(Error::NoHit),
    };
    let v = if e.tangency {
        x.v.clone()
    } else {
        let n = cfg.unit_normal(&e.instance, &e.q_hit)?;
        reflect_velocity(&x.v, &n)
    };
    Ok((PhasePoint::new(e.instance.clone(), e.q_hit.clone(), v), e))
}

/// `n` iterations of [`billiard_step`]; a missing hit ends the record with
/// [`Termination::NoHit`] instead of failing.
pub fn billiard_map_n(cfg: &BilliardConfig, x: &PhasePoint, n: usize, abort_on_tangency: bool) -> Result<TrajectoryRecord> {
    let mut events = Vec::with_capacity(n);
    let mut cur = x.clone();
    let mut termination = Termination::Completed;
    for _ in 0..n {
        match billiard_step(cfg, &cur) {
            Ok((next, e)) => {
                let tangent = e.tangency;
                events.push(e);
                cur = next;
                if tangent && abort_on_tangency {
                    termination = Termination::TangencyAbort;
                    break;
                }
            }
            Err(Error::NoHit) => {
                termination = Termination::NoHit;
                break;
            }
            Err(err) => return Err(err),
        }
    }
    Ok(TrajectoryRecord {
        initial: x.clone(),
        events,
        final_point: cur,
        termination,
    })
}

/// `T^{-1}` realized as `iota . T . iota`.
pub fn inverse_step(cfg: &BilliardConfig, x: &PhasePoint) -> Result<(PhasePoint, ReflectionEvent)> {
    let (y, e) = billiard_step(cfg, &involution(cfg, x)?)?;
    Ok((involution(cfg, &y)?, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Scatterer, ScattererInstance};
    use crate::linalg::vector;

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

    fn diagonal_start(cfg: &BilliardConfig) -> PhasePoint {
        let u = vector(&[1.0, 1.0]).normalize();
        let inst = ScattererInstance::origin(0, 2);
        PhasePoint::new(inst.clone(), cfg.radial_surface_point(&inst, &u), u)
    }

    #[test]
    fn reflection_examples() {
        let s = 0.5f64.sqrt();
        assert_eq!(reflect_velocity(&vector(&[0.0, 1.0]), &vector(&[0.0, -1.0])), vector(&[0.0, -1.0]));
        let r = reflect_velocity(&vector(&[s, s]), &vector(&[0.0, -1.0]));
        assert!((r - vector(&[s, -s])).amax() < 1e-16);
        let v = vector(&[1.0, 0.0]);
        assert_eq!(reflect_velocity(&v, &vector(&[0.0, 1.0])), v);
    }

    #[test]
    fn period_two_orbit_returns() {
        let cfg = pair();
        let x = diagonal_start(&cfg);
        let rec = billiard_map_n(&cfg, &x, 10, false).unwrap();
        assert_eq!(rec.events.len(), 10);
        assert!(rec.events.iter().all(|e| (e.cos_phi - 1.0).abs() < 1e-12));
        assert!(rec.final_point.distance(&x) < 1e-9);
        let (y, _) = billiard_step(&cfg, &x).unwrap();
        let (z, _) = billiard_step(&cfg, &y).unwrap();
        assert!(z.distance(&x) < 1e-10);
    }

    #[test]
    fn zero_steps_is_identity() {
        let cfg = pair();
        let x = diagonal_start(&cfg);
        let rec = billiard_map_n(&cfg, &x, 0, true).unwrap();
        assert!(rec.events.is_empty());
        assert_eq!(rec.final_point, x);
    }

    #[test]
    fn inverse_on_symmetric_orbit_equals_forward() {
        let cfg = pair();
        let x = diagonal_start(&cfg);
        let (f, _) = billiard_step(&cfg, &x).unwrap();
        let (b, _) = inverse_step(&cfg, &x).unwrap();
        assert!(f.distance(&b) < 1e-10);
    }

    #[test]
    fn grazing_passes_through() {
        let cfg = BilliardConfig::new(2, vec![Scatterer::sphere(0, &[0.5, 0.5], 0.2)], 2.0, 0.1).unwrap();
        // start on the surface of the lower translate, leaving along a line that grazes the origin copy
        let inst = ScattererInstance::new(0, &[0, -1]);
        let q = vector(&[0.3, -0.5]);
        let x = PhasePoint::new(inst, q, vector(&[0.0, 1.0]));
        let (y, e) = billiard_step(&cfg, &x).unwrap();
        assert!(e.tangency);
        assert!((&y.v - &x.v).amax() < 1e-12);
        assert!((e.q_hit[1] - 0.5).abs() < 1e-12);
    }
}
