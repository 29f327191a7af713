use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class; the CLI maps each onto an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },

    #[error("no positive-generation periods")]
    NoPositiveGeneration,

    #[error("only {found} positive-generation periods for {source_id}; at least {required} required")]
    InsufficientPeriods { source_id: String, found: usize, required: usize },

    #[error("unknown source type `{0}`")]
    UnknownSourceType(String),

    #[error("unknown prior class `{0}`")]
    UnknownPriorClass(String),

    #[error("duplicate source id `{0}`")]
    DuplicateSourceId(String),

    #[error("BMU `{bmu}` mapped to both `{first}` and `{second}`")]
    BmuConflict { bmu: String, first: String, second: String },

    #[error("unknown source `{0}`")]
    UnknownSource(String),

    #[error("degenerate standard deviation for {0}")]
    DegenerateStdev(&'static str),

    #[error("cannot form {bins} bins from {records} records")]
    TooManyBins { bins: usize, records: usize },

    #[error("bin widths differ ({0} vs {1} MW)")]
    BinWidthMismatch(f64, f64),

    #[error("simulation failed at t = {time_s:.3} s: {reason}")]
    SimulationFailed { time_s: f64, reason: String },

    #[error("grid cell {coords:?}: {source}")]
    GridCell { coords: [f64; 5], source: Box<Error> },

    #[error("hazard cell (source `{source_id}`, loss {loss_mw} MW, state bin {state_bin}): {source}")]
    HazardCell { source_id: String, loss_mw: f64, state_bin: usize, source: Box<Error> },

    #[error("logic-tree path {path}: {source}")]
    Path { path: String, source: Box<Error> },

    #[error("threshold {0} Hz not present in result")]
    UnknownThreshold(f64),

    #[error("total hazard rate is zero at threshold {0} Hz")]
    ZeroRate(f64),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("malformed branch weights for {0}")]
    MalformedWeights(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::MalformedWeights(_) => ErrorClass::Config,
            Error::File { .. }
            | Error::NoPositiveGeneration
            | Error::InsufficientPeriods { .. }
            | Error::UnknownSourceType(_)
            | Error::UnknownPriorClass(_)
            | Error::DuplicateSourceId(_)
            | Error::BmuConflict { .. }
            | Error::UnknownSource(_)
            | Error::EmptyTrainingSet
            | Error::TooManyBins { .. }
            | Error::DegenerateStdev(_) => ErrorClass::Data,
            Error::GridCell { source, .. } | Error::HazardCell { source, .. } | Error::Path { source, .. } => {
                match source.class() {
                    ErrorClass::Config => ErrorClass::Config,
                    ErrorClass::Data => ErrorClass::Data,
                    ErrorClass::Numeric => ErrorClass::Numeric,
                }
            }
            Error::InvalidInput(_)
            | Error::BinWidthMismatch(..)
            | Error::SimulationFailed { .. }
            | Error::UnknownThreshold(_)
            | Error::ZeroRate(_)
            | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::File { path: path.into(), message: message.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
