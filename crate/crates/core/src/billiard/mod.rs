//! The billiard map, its inverse, and the phase-space to line-space correspondence.

mod hit;
mod jacobian;
mod line;
mod map;
mod sample;
mod types;

pub(crate) use hit::first_hit_from;
pub use hit::{first_hit, line_minimum, HitOutcome};
pub use jacobian::{map_jacobian_central, map_jacobian_fd, JacobianReport, PhaseChart};
pub use line::{line_to_phase, phase_to_line, LineChart};
pub use map::{billiard_map_n, billiard_step, involution, inverse_step, reflect_velocity};
pub use sample::{random_phase_point, random_transversal_point};
pub use types::{OrientedLine, PhasePoint, ReflectionEvent, Termination, TrajectoryRecord};
