use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every walker was killed during branching.
    #[error("walker population went extinct")]
    Extinction,

    /// The population left the allowed band `[target/10, 10*target]`.
    #[error("population size {size} left the allowed band around target {target}")]
    PopulationOutOfBounds { size: usize, target: usize },

    #[error("grid too small: boundary amplitude {amplitude:e} exceeds {limit:e}")]
    GridTooSmall { amplitude: f64, limit: f64 },

    #[error("eigen-iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no classical turning point: {0}")]
    NoTurningPoint(String),

    /// A Green-function matrix element was negative; the time step is too large.
    #[error("negative Green-function entry {entry:e} at spin state {state:#x} (time step too large)")]
    NegativeGreenFunction { state: u64, entry: f64 },

    #[error("variational optimization diverged: {0}")]
    Diverged(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
