use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Encoder parameters that break the bias condition `b > c` or are non-positive.
    #[error("invalid encoder parameters: {0}")]
    InvalidParams(String),

    #[error("no firing event inside the support: {0}")]
    EmptySequence(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("Nyquist condition violated: largest gap {max_gap:.6e} s >= {nyquist:.6e} s")]
    NyquistViolated { max_gap: f64, nyquist: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("NMSE undefined: reference is identically zero on the evaluation region")]
    UndefinedNmse,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Failure inside one run of an experiment, tagged with where it happened.
    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, context: impl Into<String>) -> Self {
        Error::Stage {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any stage context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Io { .. } => 4,
            Error::NumericalFailure(_)
            | Error::NyquistViolated { .. }
            | Error::UndefinedNmse
            | Error::DegenerateDensity(_) => 3,
            Error::InvalidArgument(_)
            | Error::InvalidParams(_)
            | Error::EmptySequence(_)
            | Error::Config(_)
            | Error::Stage { .. } => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_root_cause() {
        let e = Error::UndefinedNmse.in_stage("tem-nuq seed 4");
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().starts_with("tem-nuq seed 4"));
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        let io = Error::io("/nope", std::io::Error::other("denied"));
        assert_eq!(io.in_stage("emit").exit_code(), 4);
    }
}
