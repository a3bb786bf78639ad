use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("reflection coefficient {index} has modulus {modulus}, expected 1")]
    InvalidRc { index: usize, modulus: f64 },
    #[error("training matrix is singular: {0}")]
    SingularTraining(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid pilot matrix: {0}")]
    InvalidPilot(String),
    #[error("SINR targets are infeasible: {0}")]
    InfeasibleTargets(String),
    #[error("every training period was infeasible")]
    InfeasibleTrial,
    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
