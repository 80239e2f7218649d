//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A price at or below zero makes the position limit meaningless and
    /// signals a corrupt price series.
    #[error("price must be positive, got {0}")]
    NonPositivePrice(f64),

    /// The ±1-tick generator walked the price down to zero.
    #[error("generated price reached zero at step {step}")]
    PriceReachedZero { step: usize },

    #[error("trend parameter {name}={value} out of range; must lie in [-0.5, 0.5]")]
    TrendParamOutOfRange { name: &'static str, value: f64 },

    #[error("probability {0} out of range; must lie in [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("markov order {0} unsupported; supported orders are 0, 1, 2")]
    UnsupportedOrder(usize),

    #[error("strategy table has {got} entries, expected {expected}")]
    BadTableLength { got: usize, expected: usize },

    #[error("price series has {got} prices but at least {need} are required")]
    SeriesTooShort { got: usize, need: usize },

    #[error("history length {0} out of range; must lie in 1..={max}", max = crate::domain::MAX_HISTORY_BITS)]
    BadHistoryLength(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Estimation found history patterns that never occur; converting the
    /// estimate to a generator table is refused rather than zero-filled.
    #[error("transition pattern(s) {0} never occur in the series; probabilities undefined")]
    UndefinedTransitions(String),

    #[error("{path}: cannot open: {source}")]
    CsvOpen {
        path: String,
        source: std::io::Error,
    },

    #[error("{path}: missing column {column:?} in header")]
    CsvMissingColumn { path: String, column: String },

    #[error("{path}: row {row}: {msg}")]
    CsvRow {
        path: String,
        row: usize,
        msg: String,
    },

    #[error("{path}: dates are not strictly increasing at row {row}")]
    CsvDateOrder { path: String, row: usize },

    #[error("{path}: only {usable} usable rows, need at least {need}")]
    CsvTooFewRows {
        path: String,
        usable: usize,
        need: usize,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
