use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("infeasible chord: r = {r} is shorter than |R1 - R2| = {gap}")]
    InfeasibleChord { r: f64, gap: f64 },

    #[error("point is not on the sphere: |p - o| = {norm}, radius {radius}")]
    OffSphere { norm: f64, radius: f64 },

    #[error("vector is not unit length: norm {0}")]
    NotUnit(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pairwise distances are not realizable on the sphere (Gram matrix not PSD)")]
    InfeasibleGram,

    #[error("ball recursion depth {depth} exceeds max_ball_depth = {max}")]
    BallDepthExceeded { depth: usize, max: usize },

    #[error("replication bound violated: {stored} stored ids > budget {budget}")]
    ReplicationExceeded { stored: u64, budget: f64 },

    #[error("corrupt index file: {0}")]
    Corrupt(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
