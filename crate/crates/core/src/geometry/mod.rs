//! Scatterers, periodic configurations and their validation.

mod config;
mod scatterer;
mod validate;

pub(crate) use config::lattice_box;
pub use config::{min_hessian_eigenvalue, BilliardConfig, ScattererInstance, Tolerances};
pub use scatterer::{Bump, DerivativeBundle, HigherDerivative, Scatterer, ScattererKind, Shape, MAX_DERIVATIVE_ORDER};
pub use validate::{validate_configuration, ValidationReport};
