use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MISSING_ARTIFACT: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_DATA: i32 = 6;
pub const EXIT_LOCKED: i32 = 7;
pub const EXIT_NETWORK: i32 = 8;

/// Shown under `--help`.
pub const EXIT_CODE_HELP: &str = "\
Exit codes:
  0  success
  2  usage error
  3  invalid configuration
  4  missing upstream artifact (run the earlier stage first)
  5  file system error
  6  data or model error
  7  output directory locked by another invocation
  8  embedding endpoint unreachable or malformed

Errors are also written to stderr as one JSON object.";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("missing artifact `{0}`; run the stage that produces it first")]
    MissingArtifact(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output directory is locked ({0} exists)")]
    Locked(PathBuf),

    #[error(transparent)]
    Core(#[from] peacelex::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use peacelex::Error as E;
        match self {
            CliError::ConfigInvalid(_) => EXIT_CONFIG,
            CliError::MissingArtifact(_) => EXIT_MISSING_ARTIFACT,
            CliError::Io { .. } | CliError::Core(E::Io { .. }) => EXIT_IO,
            CliError::Locked(_) => EXIT_LOCKED,
            CliError::Core(E::EndpointUnreachable { .. } | E::MalformedResponse(_)) => EXIT_NETWORK,
            CliError::Core(_) => EXIT_DATA,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "config-invalid",
            CliError::MissingArtifact(_) => "missing-artifact",
            CliError::Io { .. } => "io",
            CliError::Locked(_) => "locked",
            CliError::Core(_) => match self.exit_code() {
                EXIT_IO => "io",
                EXIT_NETWORK => "network",
                _ => "data",
            },
        }
    }

    /// One-line JSON error report.
    pub fn report(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Report {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .expect("report serializes")
    }
}
