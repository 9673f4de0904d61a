use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivative order {requested} not supported (maximum {max})")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("point is off the surface: |R| = {residual:e}")]
    OffSurface { residual: f64 },

    #[error("degenerate gradient: |grad R| = {norm:e}")]
    DegenerateGradient { norm: f64 },

    #[error("convexity violated: smallest Hessian eigenvalue {min_eigenvalue:e}")]
    ConvexityViolation { min_eigenvalue: f64 },

    #[error("bump amplitude too large: smallest Hessian eigenvalue {min_eigenvalue:e}")]
    AmplitudeTooLarge { min_eigenvalue: f64 },

    #[error("multiple collision: hits at t = {t_first} and t = {t_second}")]
    MultipleCollision { t_first: f64, t_second: f64 },

    #[error("start point lies inside scatterer {scatterer} (R = {value:e})")]
    InvalidStart { scatterer: usize, value: f64 },

    #[error("scene failed validation: {0}")]
    ValidationFailed(String),

    #[error("no collision within the horizon bound")]
    NoHit,

    #[error("line misses the target scatterer (min R = {min_value:e})")]
    NoIntersection { min_value: f64 },

    #[error("finite-difference stencil crosses a singularity")]
    StencilCrossing,

    #[error("no interior minimizer along the line")]
    NoMinimum,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("chart coordinate {value} exceeds validity radius {radius}")]
    OutOfChart { radius: f64, value: f64 },

    #[error("phantom continuation unavailable at upsilon = {upsilon}")]
    ContinuationUnavailable { upsilon: f64 },

    #[error("zero hit count at delta = {delta:e}")]
    InsufficientSamples { delta: f64 },

    #[error("point cloud too sparse: spacing {spacing:e} exceeds {required:e}")]
    ResolutionTooCoarse { spacing: f64, required: f64 },

    #[error("combinatorial type broken at event {step}: {reason}")]
    Infeasible { step: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io(_) | Error::UnsupportedOrder { .. } => 4,
            Error::ConvexityViolation { .. }
            | Error::AmplitudeTooLarge { .. }
            | Error::InvalidStart { .. }
            | Error::ValidationFailed(_) => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}
