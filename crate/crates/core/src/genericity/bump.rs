//! Local bump perturbations of a scatterer.

use crate::error::{Error, Result};
use crate::geometry::{min_hessian_eigenvalue, Bump, Scatterer};

const CONVEXITY_SAMPLES: usize = 4096;

/// Adds `a exp(-1 / (1 - |x - c|^2 / rho^2))` outward at `c` and re-checks convexity.
///
/// The result agrees with `s` bit for bit outside `B(c, rho)`.
pub fn bump_perturb(s: &Scatterer, c: &[f64], rho: f64, a: f64) -> Result<Scatterer> {
    if !(rho > 0.0) || c.len() != s.dim() {
        return Err(Error::InvalidInput("bump needs a positive radius and a center of the scatterer's dimension".into()));
    }
    let out = s.with_bump(Bump {
        center: c.to_vec(),
        radius: rho,
        amplitude: a,
    });
    match min_hessian_eigenvalue(&out, CONVEXITY_SAMPLES, 0xB0B) {
        Ok(_) => Ok(out),
        Err(Error::ConvexityViolation { min_eigenvalue }) => Err(Error::AmplitudeTooLarge { min_eigenvalue }),
        Err(e) => Err(e),
    }
}
