use std::fmt;

use mge_core::Error;

/// Exit status classes of the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Input = 3,
    Internal = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure {
            kind: ExitKind::Usage,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Failure {
            kind: ExitKind::Input,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        Failure {
            kind: ExitKind::Internal,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Library errors raised while reading or validating inputs.
pub fn input_error(e: Error) -> Failure {
    Failure {
        kind: ExitKind::Input,
        error: e.into(),
    }
}

/// Library errors raised after the inputs were accepted.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::InvalidArgument(_) => ExitKind::Usage,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::NonFinite(_) => ExitKind::Internal,
            _ => ExitKind::Input,
        };
        Failure { kind, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            kind: ExitKind::Internal,
            error: e.into(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            kind: ExitKind::Internal,
            error: e.into(),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;
