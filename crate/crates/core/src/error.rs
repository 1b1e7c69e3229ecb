//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // Book replay
    #[error("event at {ts_micros}us references unknown order id {order_id:?}")]
    UnknownOrderId { ts_micros: i64, order_id: String },
    #[error("book crossed after event at {ts_micros}us: best bid {bid_ticks} >= best ask {ask_ticks}")]
    CrossedBook {
        ts_micros: i64,
        bid_ticks: i64,
        ask_ticks: i64,
    },
    #[error("event stream is empty")]
    EmptyStream,

    // Ingest
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unsupported message type {kind:?} at line {line}")]
    UnsupportedType { line: usize, kind: String },
    #[error("timestamps regress at line {line}: {prev_micros}us followed by {ts_micros}us")]
    ClockSkew {
        line: usize,
        prev_micros: i64,
        ts_micros: i64,
    },

    // Physics
    #[error("no match events: match-price velocity is undefined")]
    NoMatches,
    #[error("no depth in the grid produced a defined correlation")]
    DegenerateSeries,
    #[error("need at least {required} windows for a stable estimate, got {actual}")]
    TooFewWindows { required: usize, actual: usize },

    // Baselines
    #[error("fewer than {required} complete volume buckets ({actual})")]
    InsufficientVolume { required: usize, actual: usize },
    #[error("best bid/ask sizes unavailable: OFI cannot be computed")]
    SizesUnavailable,
    #[error("need at least {required} observations, got {actual}")]
    TooFewPoints { required: usize, actual: usize },
    #[error("zero volume in window: Amihud ratio undefined")]
    ZeroVolume,

    // Stats
    #[error("regressor has zero variance")]
    DegenerateRegressor,
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series too short: need {required} points, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },
    #[error("no price changes in the evaluation window")]
    NoPriceChanges,

    // Synth
    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),
    #[error("shock of {requested} units exceeds resting liquidity of {available}")]
    InsufficientLiquidity { requested: u64, available: u64 },

    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
