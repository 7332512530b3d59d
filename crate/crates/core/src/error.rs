use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("branching factor must be at least 2, got {0}")]
    BranchingTooSmall(usize),

    #[error("row {row} has length {len}, expected {expected}")]
    RowLength {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("row {row} is not stochastic: entries sum to {sum}")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("row {row} entry {index} is {value}, ratio entries must be strictly positive")]
    NonPositiveRatio {
        row: usize,
        index: usize,
        value: f64,
    },

    #[error("row {row} entry {index} is {value}, entries must be nonnegative and finite")]
    InvalidEntry {
        row: usize,
        index: usize,
        value: f64,
    },

    #[error("a structure needs at least one row")]
    EmptyRows,

    #[error("level {level} is beyond the {available} defined level(s)")]
    LevelUnreachable { level: usize, available: usize },

    #[error("cell index {index} at position {position} is outside [1, {n}]")]
    IndexOutOfRange {
        index: usize,
        position: usize,
        n: usize,
    },

    #[error("address has depth {got}, expected level {expected}")]
    LevelMismatch { expected: usize, got: usize },

    #[error("measures live on different partitions or levels")]
    SchemeMismatch,

    #[error("point {0} is outside [0, 1]")]
    PointOutOfRange(f64),

    #[error("mass vector is not a probability vector: {0}")]
    NotStochastic(String),

    #[error("identical measures: total difference is zero")]
    IdenticalMeasures,

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("degenerate normalizer z = {0}")]
    DegenerateNormalizer(f64),

    #[error("update produced negative mass {value} in cell {cell}")]
    NegativeMass { cell: usize, value: f64 },

    #[error("redistribution does not conserve mass: plan carries {planned}, cell holds {held}")]
    NonConservingPlan { planned: f64, held: f64 },

    #[error("invalid redistribution plan: {0}")]
    InvalidPlan(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("reclaim target {requested} exceeds the bound {bound}")]
    ExceedsBound { requested: f64, bound: f64 },

    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),

    #[error("no feasible perturbation: {0}")]
    Infeasible(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("invalid scenario: {0}")]
    Config(String),

    #[error("unknown verification suite `{name}`, available: {available}")]
    UnknownSuite { name: String, available: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for failures caused by bad input rather than I/O.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Context { source, .. } => source.is_validation(),
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => false,
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
