//! Searches for trajectories with simultaneous tangencies and the bump
//! perturbations that remove them.

mod bump;
mod census;
mod problem;

pub use bump::bump_perturb;
pub use census::{count_near_tangencies, tangency_census, Census, CensusRow, CensusWitness, MAX_TYPE_LENGTH};
pub use problem::{
    multi_tangency_solve, tangency_residuals, EventKind, RealizedEvent, SolveOutcome, TangencyConstraintProblem, CONVERGED_RESIDUAL,
};
