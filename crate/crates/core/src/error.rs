use thiserror::Error;

/// Errors raised by grid construction, projection, diagnostics and time stepping.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("exp(alpha z) overflows on the grid (alpha = {alpha}, z_max = {z_max})")]
    NumericOverflow { alpha: f64, z_max: f64 },

    #[error("reference profile vanishes at cell {cell} where the density is positive")]
    SupportMismatch { cell: usize },

    #[error("no polarised equilibrium: total mass {mass} does not exceed gamma = {gamma}")]
    NoPolarisedEquilibrium { mass: f64, gamma: f64 },

    #[error("time step {dt} exceeds the positivity bound {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("density became negative in cell {cell} ({value})")]
    NegativeDensity { cell: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
