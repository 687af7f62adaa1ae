use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::providers::ProviderError;
use crate::workflow::{Phase, Role};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed, incomplete or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Missing or unusable user input (task file, codebase, fixtures).
    #[error("input error: {0}")]
    Input(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Provider(#[from] ProviderError),

    /// A prompt or chunk cannot fit the provider's effective token budget.
    #[error("token budget error: {0}")]
    Budget(String),

    /// An arbitration document is missing a required header or section.
    #[error("parse error: {0}")]
    Parse(String),

    /// A ratio whose denominator is zero.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("run error: {0}")]
    Run(String),

    /// A failure inside one phase of the workflow, tagged with where it happened.
    #[error("{phase} / {role} failed: {source}")]
    Phase {
        phase: Phase,
        role: Role,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this failure class.
    ///
    /// `0` is success; `1` input/config; `2` provider/network; `3` budget;
    /// `4` parse.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Io { .. } | Error::Run(_) => 1,
            Error::Provider(_) => 2,
            Error::Budget(_) => 3,
            Error::Parse(_) | Error::UndefinedMetric(_) => 4,
            Error::Phase { source, .. } => source.exit_code(),
        }
    }

    /// Strips phase context, returning the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }
}
