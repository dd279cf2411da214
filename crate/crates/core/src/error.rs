use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} is outside the domain")]
    DomainMembership { point: Vec<f64> },

    #[error("point {point:?} is not on the boundary (residual {residual:.3e})")]
    NotOnBoundary { point: Vec<f64>, residual: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("singular evaluation at {point:?}: weight {weight:.3e} is not positive")]
    SingularEvaluation { point: Vec<f64>, weight: f64 },

    #[error("stencil error: {0}")]
    Stencil(String),

    #[error("ill-posed problem: alpha = {alpha} must lie in (0,2)")]
    IllPosed { alpha: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Newton iteration diverged after {} iterations (last residual {:.3e})", residual_history.len(), residual_history.last().copied().unwrap_or(f64::NAN))]
    Divergence { residual_history: Vec<f64> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate point set: affine rank {rank} < dimension {dim}")]
    Rank { rank: usize, dim: usize },

    #[error("convexity violation: maximal section height {hbar:.3e} is negative")]
    ConvexityViolation { hbar: f64 },

    #[error("parameter range error: {0}")]
    Range(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
