use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("atom space must contain at least one atom")]
    EmptySpace,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("cell {cell} of the partition is empty")]
    EmptyCell { cell: usize },

    #[error("label {label} at atom {atom} is out of range 1..={cells}")]
    LabelOutOfRange {
        atom: usize,
        label: usize,
        cells: usize,
    },

    #[error("not a permutation: index {index} is {reason}")]
    NotAPermutation { index: usize, reason: &'static str },

    #[error("matrix is not square or has ragged rows")]
    NotSquare,

    #[error("not a Markov matrix: {0}")]
    NotMarkov(String),

    #[error("epsilon must be a positive rational, got {0}")]
    NonPositiveEpsilon(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("coupling is not realizable: {0}")]
    NotRealizable(String),

    #[error("grid repair infeasible: {0}")]
    InfeasibleRepair(String),

    #[error("net construction infeasible: {0}")]
    InfeasibleNet(String),

    #[error("matrices are equal; nothing to separate")]
    NothingToSeparate,

    #[error("matrix is not idempotent")]
    NotIdempotent,

    #[error("Cesàro averages did not settle after {iterations} doublings (last difference {last_difference:e})")]
    NoConvergence {
        iterations: usize,
        last_difference: f64,
    },

    #[error("cannot parse rational {0:?}")]
    ParseRational(String),

    #[error("internal invariant broken: {0}")]
    Internal(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
