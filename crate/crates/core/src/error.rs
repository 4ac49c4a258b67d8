use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the library and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty basis")]
    EmptyBasis,

    #[error("duplicate exponent {0}")]
    DuplicateExponent(u32),

    #[error("empty time grid")]
    EmptyGrid,

    #[error("duplicate time {0}")]
    DuplicateTime(f64),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("coincident evaluation points")]
    CoincidentPoints,

    #[error("partition too large for combinatorial evaluation (weight {weight} > {limit})")]
    PartitionTooLarge { weight: u32, limit: u32 },

    #[error("partition parts must be weakly decreasing")]
    InvalidPartition,

    #[error("underdetermined basis: {points} grid points for {functions} basis functions")]
    Underdetermined { points: usize, functions: usize },

    #[error("empty group")]
    EmptyGroup,

    #[error("handle/grid mismatch")]
    HandleMismatch,

    #[error("cluster emptied: cluster {0}")]
    ClusterEmptied(usize),

    #[error("cannot form {clusters} clusters from {signals} signals")]
    TooManyClusters { clusters: usize, signals: usize },

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    #[error("{0}")]
    Input(String),

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the failure class: 2 for usage and input
    /// problems, 4 for numerical failures. Exit code 3 is reserved for a
    /// singular verdict, which is a result rather than an error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) | Error::SvdNoConvergence => 4,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(e.to_string())
    }
}
