use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus for `{0}` contains no tokens")]
    EmptyCorpus(String),

    #[error("capitalization heuristic requested but no raw-text case evidence was supplied")]
    MissingRawText,

    #[error("filter policy conflict: {0:?} listed in both remove and keep sets")]
    PolicyConflict(Vec<String>),

    #[error("profile for `{country}` has label {found}, expected {expected}")]
    LabelMismatch {
        country: String,
        expected: String,
        found: String,
    },

    #[error("cannot aggregate an empty group")]
    EmptyGroup,

    #[error("country `{0}` has no HigherPeace/LowerPeace label")]
    UnlabeledCountry(String),

    #[error("training data contains a single class")]
    SingleClassData,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("canvas too small: {} word(s) could not be placed", .overflow.len())]
    CanvasTooSmall { overflow: Vec<String> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("embedding dimension inconsistent for `{word}`: expected {expected}, got {found}")]
    DimensionInconsistent {
        word: String,
        expected: usize,
        found: usize,
    },

    #[error("embedding endpoint unreachable after {attempts} attempt(s): {message}")]
    EndpointUnreachable { attempts: u32, message: String },

    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("theme assignments share no words")]
    NoOverlap,

    #[error("word `{word}` appears in themes `{first}` and `{second}`")]
    OverlappingThemes {
        word: String,
        first: String,
        second: String,
    },

    #[error("theme file references unknown word `{0}`")]
    UnknownWord(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
