use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed NIfTI header field `{field}`: {reason}")]
    Parse { field: &'static str, reason: String },

    #[error("expected a 3D volume, found {0} non-singleton dimensions")]
    Dimensionality(usize),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedFormat(i16),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("grids are not aligned: {0}")]
    Alignment(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("ROI placement failed: {0}")]
    Placement(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("bootstrap unstable: statistic undefined on {undefined} of {draws} draws")]
    Instability { undefined: usize, draws: usize },

    #[error("manifest row {row}: {reason}")]
    Manifest { row: usize, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("no scan in the cohort completed successfully")]
    EmptyCohort,

    #[error("report serialization: {0}")]
    Serialize(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Parse {
            field,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used in per-scan report rows.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Dimensionality(_) => "dimensionality",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::Argument(_) => "argument",
            Error::Alignment(_) => "alignment",
            Error::EmptyMask(_) => "empty-mask",
            Error::Placement(_) => "placement",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::Degenerate(_) => "degenerate",
            Error::Instability { .. } => "instability",
            Error::Manifest { .. } => "manifest",
            Error::Config(_) => "config",
            Error::EmptyCohort => "empty-cohort",
            Error::Serialize(_) => "serialize",
        }
    }
}
