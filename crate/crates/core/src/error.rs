use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field is bound to a different grid")]
    GridMismatch,
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid exponent p = {0}: must satisfy p > 2")]
    InvalidExponent(f64),
    #[error("operation requires p >= 3 (got p = {0}); use the fiber scan / damped flow instead")]
    ExponentBelowThree(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operation needs a nonzero field")]
    ZeroField,
    #[error("fiber root bracket could not be established")]
    NoBracket,
    #[error("group {0} has no element with negative character")]
    TrivialCharacter(String),
    #[error("unknown symmetry group {0:?} (expected radial, oddeven or dihedral:<k>)")]
    UnknownGroup(String),
    #[error("iterate collapsed to the zero field (mass {mass:.3e} below floor)")]
    Collapse { mass: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("malformed field file: {0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
