use std::fmt;

/// Errors raised by the beamforming, compression and deconvolution pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid geometry, grid or run configuration.
    Config(String),
    /// Malformed user input (scene entries, files, dimensions).
    Input(String),
    /// A grid point coincides with a microphone.
    Singularity {
        point: usize,
        mic: usize,
    },
    /// The requested PSF matrix would not fit the memory budget.
    Resource {
        required_bytes: u128,
        budget_bytes: u128,
    },
    /// Operation not allowed in the current state, e.g. removing the CSM diagonal twice.
    State(String),
    /// Solver precondition violated (non-positive diagonal).
    Solver(String),
    /// Non-finite value produced during computation.
    Numeric(String),
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Singularity { point, mic } => {
                write!(f, "grid point {point} coincides with microphone {mic}")
            }
            Error::Resource {
                required_bytes,
                budget_bytes,
            } => write!(
                f,
                "PSF matrix needs {required_bytes} bytes but the budget is {budget_bytes} bytes; \
                 reduce the number of grid points per side"
            ),
            Error::State(msg) => write!(f, "state error: {msg}"),
            Error::Solver(msg) => write!(f, "solver error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
