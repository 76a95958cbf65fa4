use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is disconnected")]
    Disconnected,
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("no connected geometric graph after {0} attempts")]
    ConnectivityRetriesExceeded(usize),
    #[error("nodes {0} and {1} are not neighbors")]
    NotNeighbors(usize, usize),
    #[error(
        "Newton iteration did not converge (residual {residual:e} after {iterations} iterations)"
    )]
    NewtonNotConverged { iterations: usize, residual: f64 },
    #[error("invalid cost: {0}")]
    InvalidCost(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("beta mask marks slot {slot} delivered but its origin node {origin} is inactive")]
    MaskInconsistent { slot: usize, origin: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block Hessian is singular")]
    SingularH,
    #[error("fixed-point system is inconsistent (residual {0:e})")]
    InconsistentSystem(f64),
    #[error("Monte Carlo estimate too noisy (max standard error {0:e})")]
    EstimatorVarianceTooHigh(f64),
    #[error("fit window has {0} points, need at least 20")]
    WindowTooShort(usize),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
