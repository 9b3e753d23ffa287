use thiserror::Error;

/// Errors raised by the simulation kernels.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-relativistic gate failed: epsilon_rel = {epsilon:.4e} >= threshold {threshold}")]
    NonRelativistic { epsilon: f64, threshold: f64 },

    #[error("grid axis {axis} has {n} nodes, at least {min} required")]
    GridTooThin { axis: usize, n: usize, min: usize },

    #[error("grid box too small: {0}")]
    BoxTooSmall(String),

    #[error("grids of the operands differ")]
    GridMismatch,

    #[error("time step {dt:.4e} exceeds the precession limit {max:.4e}")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("packet reached the periodic boundary: {fraction:.3e} of the norm in the margin shell (tolerance {tol:.1e})")]
    BoundaryLeak { fraction: f64, tol: f64 },

    #[error("lumps not yet separated (separation/width ratio {ratio:.3})")]
    NotSeparated { ratio: f64 },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
