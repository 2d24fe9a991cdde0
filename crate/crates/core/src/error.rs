use thiserror::Error;

/// Errors raised by constructors, measures, checkers and constructions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not rectangular: row {row} has {found} entries, expected {expected}")]
    NonRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("matrix is empty")]
    Empty,
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("entries sum to {total}, expected 1 (pass the normalize flag to rescale)")]
    NotNormalized { total: f64 },
    #[error("entries sum to zero; cannot normalize")]
    ZeroTotal,
    #[error("label count {found} does not match {axis} count {expected}")]
    LabelMismatch {
        axis: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("product would have {entries} entries, above the cap of {cap}")]
    SizeOverflow { entries: u128, cap: usize },
    #[error("{axis} index {index} out of range for size {len}")]
    IndexOutOfRange {
        axis: &'static str,
        index: usize,
        len: usize,
    },
    #[error("exact enumeration needs at most {cap_rows}x{cap_cols} atoms, got {rows}x{cols}")]
    TooLargeForExact {
        rows: usize,
        cols: usize,
        cap_rows: usize,
        cap_cols: usize,
    },
    #[error("singular value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{name} = {value} is out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("score function on {0} atoms has zero variance")]
    ZeroVariance(&'static str),
    #[error("exact evaluation needs {states} states, above the cap of {cap}")]
    StateSpaceTooLarge { states: f64, cap: f64 },
    #[error("monte carlo needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
