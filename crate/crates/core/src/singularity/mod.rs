//! Tangency manifolds in line space, quasi-regular charts with phantom
//! continuation, even/odd level-set resolution and singularity pullbacks.

mod chart;
mod pullback;
mod resolution;
mod tangency;

pub use chart::{continued_reflection, derivative_blowup_exponent, BlowupChart, QuasiRegularChart};
pub(crate) use pullback::pull_one;
pub use pullback::{pullback_singularity, PullbackSamples, RELAND_COS};
pub use resolution::{
    even_odd_decompose, jet_nonvanishing_order, resolved_level_check, JetOrder, LevelCheck, ResolutionTable,
    JET_ORDER_CAP,
};
pub use tangency::{
    line_tangency_value, pca_spectrum, sample_tangency_near, sample_tangency_set, solve_tangent_line,
    spectral_dimension, TangencyRow, TangencySolution,
};
