//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no observations")]
    NoObservations,

    #[error("degenerate grid: need at least 2 bins, got {0}")]
    DegenerateGrid(usize),

    #[error("invalid grid bounds: lower {lower} must be strictly below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("point off grid: {point} is more than one bandwidth outside [{lower}, {upper}]")]
    PointOffGrid { point: f64, lower: f64, upper: f64 },

    #[error("invalid bandwidth: {0} (must be positive and finite)")]
    InvalidBandwidth(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty histogram: total count must be positive")]
    EmptyHistogram,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("mismatched grids")]
    GridMismatch,

    #[error("unsmoothed support mismatch: q has zero mass in bin {0} where p is positive")]
    UnsmoothedSupport(usize),

    #[error("unsmoothed marginal: bin {0} has zero mass")]
    UnsmoothedMarginal(usize),

    #[error("empty posterior support")]
    EmptyPosteriorSupport,

    #[error("weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),

    #[error("weight unidentifiable: every prior equals its social mean")]
    WeightUnidentifiable,

    #[error("undefined denominator: baseline error {0} must lie below 100")]
    UndefinedDenominator(f64),

    #[error("zero actual value at index {0} under relative error mode")]
    ZeroActual(usize),

    #[error("no records")]
    NoRecords,

    #[error("duplicate round id: {0}")]
    DuplicateRound(String),

    #[error("round not found: {0}")]
    RoundNotFound(String),

    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("unknown model name `{name}` (valid: {valid})")]
    UnknownModel { name: String, valid: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
