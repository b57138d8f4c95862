use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate an operation's preconditions (shapes, symmetry, ranks).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular system: {0}")]
    Singular(String),

    /// A dense kernel was asked to work beyond its size guard.
    #[error("refused: {0}")]
    Refused(String),

    /// The Leja interpolation did not converge even after the maximum number of substeps.
    #[error("matrix exponential action diverged after {substeps} substeps (last correction {residual:.3e})")]
    Divergence { substeps: usize, residual: f64 },

    #[error("non-finite value in inner integration at t = {time}")]
    BlowUp { time: f64 },

    #[error("step size underflow at t = {time} (h = {step:.3e}); problem too stiff for an explicit method")]
    StepSizeUnderflow { time: f64, step: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid problem description: {0}")]
    InvalidProblem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
