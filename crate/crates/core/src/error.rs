use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("degenerate interval [{a}, {b}]: fewer than two grid points after restriction")]
    DegenerateInterval { a: f64, b: f64 },
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("time column already present")]
    TimeAlreadyAugmented,
    #[error("drop fraction {fraction} leaves fewer than two points on a {points}-point grid")]
    DropFractionTooLarge { fraction: f64, points: usize },
    #[error("graph contains a directed cycle of length > 1")]
    Cyclic,
    #[error("lifted edge set is not consistent with a collapsed graph: {0}")]
    InconsistentLift(String),
    #[error("node sets must be pairwise disjoint")]
    OverlappingSets,
    #[error("node index {index} out of range for {d} nodes")]
    NodeOutOfRange { index: usize, d: usize },
    #[error("graphs have different node counts ({0} vs {1})")]
    NodeCountMismatch(usize, usize),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("simulation diverged on path {path} at step {step}")]
    SimulationDiverged { path: usize, step: usize },
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("unknown experiment family '{0}'")]
    UnknownFamily(String),
    #[error("invalid kernel configuration: {0}")]
    InvalidKernel(String),
    #[error("non-finite kernel value at PDE cell ({row}, {col}) of a {rows}x{cols} grid")]
    NonFiniteKernel { row: usize, col: usize, rows: usize, cols: usize },
    #[error("gram entry ({row}, {col}): {source}")]
    GramEntry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("signature of depth {depth} in dimension {dim} exceeds the memory guard")]
    SignatureTooLarge { depth: usize, dim: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid test configuration: {0}")]
    InvalidTestConfig(String),
    #[error("index lists overlap or are too short: {0}")]
    InvalidIndexSets(String),
    #[error("conditioning family for {from}->{to} has {size} candidates, above cap {cap}")]
    ConditioningCapExceeded { from: usize, to: usize, size: usize, cap: usize },
    #[error("query {query}: {source}")]
    Query {
        query: String,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid discovery configuration: {0}")]
    InvalidDiscoveryConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of numerical origin (divergence, non-finite values, factorizations).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::SimulationDiverged { .. } | Error::NotPositiveDefinite | Error::NonFiniteKernel { .. } => true,
            Error::GramEntry { source, .. } | Error::Query { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// True for filesystem or serialization failures.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => true,
            Error::Query { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
