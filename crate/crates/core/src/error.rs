use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph must contain at least one node")]
    EmptyGraph,
    #[error("edge ({0}, {1}) references a node outside [0, {2})")]
    NodeOutOfRange(usize, usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("graph is disconnected: node {0} is unreachable from node 0")]
    DisconnectedGraph(usize),
    #[error("({0}, {1}) is not an edge of the graph")]
    NotAnEdge(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible domain: {0}")]
    InfeasibleDomain(String),
    #[error("historical index {index} is outside the buffered window [{oldest}, {newest}]")]
    OutOfWindow {
        index: usize,
        oldest: usize,
        newest: usize,
    },
    #[error("operation requires a {expected} constraint family")]
    WrongConstraintFamily { expected: &'static str },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "no feasible dual regularizer: 1 - 8*C*eps^2 = {discriminant:.3e} < 0 with C = {c:.6e}, \
         eps = {epsilon:.3e}; a horizon T >= {min_horizon:.3e} is required"
    )]
    NoFeasibleDelta {
        c: f64,
        epsilon: f64,
        discriminant: f64,
        min_horizon: f64,
    },
    #[error("degenerate series: {positive} positive points after burn-in, at least 10 required")]
    DegenerateSeries { positive: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
