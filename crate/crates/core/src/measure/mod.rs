//! Tube-volume estimates for zero sets and for neighbourhoods of singularity manifolds.

mod field;
mod singular;
mod tube;

pub use field::{newton_project, zero_set_distance, ScalarField, ScalarFieldSpec, TestField, ZeroCloud};
pub use singular::{singularity_cloud, singularity_tube_measure, PhaseWindow, COMPONENT_GAP, SingularCloud, SingularTubeReport};
pub use tube::{binomial_halfwidth, ratio_spread, sample_distances, scaling_fit, tube_volume, TubeEstimate};
