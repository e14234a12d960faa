use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants are grouped the way the command-line front end maps them to exit
/// codes: input data problems, engine/statistical problems, and configuration
/// problems. [`Error::kind`] gives the stable machine-readable name.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,

    #[error("invalid price {value} on {date}")]
    InvalidPrice { date: NaiveDate, value: f64 },

    #[error("value {value} at {date} is outside [0, 100]")]
    RangeViolation { date: NaiveDate, value: f64 },

    #[error("calendar violation at {date}: {reason}")]
    CalendarViolation { date: NaiveDate, reason: String },

    #[error("duplicate week label {date}")]
    DuplicateLabel { date: NaiveDate },

    #[error("dates out of order at row {row}: {date}")]
    OrderViolation { row: usize, date: NaiveDate },

    #[error("format error at row {row}: {message}")]
    FormatError { row: usize, message: String },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("search series and returns have no overlapping weeks")]
    NoOverlap,

    #[error("insufficient history: need {needed} weeks, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("insufficient data: need at least 2 observations, have {n}")]
    InsufficientData { n: usize },

    #[error("returns have zero variance")]
    NoVariance,

    #[error("read of {series_id} at {requested} is after the view horizon {as_of}")]
    FutureAccess {
        series_id: String,
        requested: NaiveDate,
        as_of: NaiveDate,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("keyword {keyword:?} only available from {available}, after backtest start {start}")]
    Anachronistic {
        keyword: String,
        available: NaiveDate,
        start: NaiveDate,
    },

    #[error("all {trials} trials were degenerate")]
    DegenerateStudy { trials: usize },
}

/// Coarse grouping used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Engine,
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptySeries => "EmptySeries",
            Error::InvalidPrice { .. } => "InvalidPrice",
            Error::RangeViolation { .. } => "RangeViolation",
            Error::CalendarViolation { .. } => "CalendarViolation",
            Error::DuplicateLabel { .. } => "DuplicateLabel",
            Error::OrderViolation { .. } => "OrderViolation",
            Error::FormatError { .. } => "FormatError",
            Error::FileNotFound(_) => "FileNotFound",
            Error::Io { .. } => "Io",
            Error::NoOverlap => "NoOverlap",
            Error::InsufficientHistory { .. } => "InsufficientHistory",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NoVariance => "NoVariance",
            Error::FutureAccess { .. } => "FutureAccess",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidSplit(_) => "InvalidSplit",
            Error::DegenerateStudy { .. } => "DegenerateStudy",
            Error::Anachronistic { .. } => "Anachronistic",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::InvalidSplit(_) => ErrorClass::Usage,
            Error::EmptySeries
            | Error::InvalidPrice { .. }
            | Error::RangeViolation { .. }
            | Error::CalendarViolation { .. }
            | Error::DuplicateLabel { .. }
            | Error::OrderViolation { .. }
            | Error::FormatError { .. }
            | Error::FileNotFound(_)
            | Error::Anachronistic { .. }
            | Error::Io { .. } => ErrorClass::Data,
            Error::NoOverlap
            | Error::InsufficientHistory { .. }
            | Error::InsufficientData { .. }
            | Error::NoVariance
            | Error::FutureAccess { .. }
            | Error::DegenerateStudy { .. } => ErrorClass::Engine,
        }
    }
}
