use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel evaluated outside its domain: t = {0}")]
    Domain(f64),

    #[error("integral diverges (partial sum {partial:.6e} after {levels} refinement levels)")]
    DivergentIntegral { partial: f64, levels: usize },

    #[error("unsupported dimension N = {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("non-finite sample at node {0}")]
    NonFiniteSample(usize),

    #[error("radial offset {value} at node {node} violates |u| < 1/2")]
    AmplitudeOverflow { node: usize, value: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape file: {0}")]
    ShapeParse(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
