use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid user input: parameters, configuration files, CSV headers.
    #[error("configuration error: {0}")]
    Config(String),

    /// A computation produced a non-finite value or could not proceed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Identifiability failure: the invariant mean of h is not one-to-one on Θ.
    #[error("non-identifiable model: {0}")]
    NonIdentifiable(String),

    /// A failure inside one trial of a batch experiment.
    #[error("trial {trial}: {source}")]
    Trial { trial: usize, source: Box<Error> },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Numerical(_) | Error::NonIdentifiable(_) => 3,
            Error::Trial { source, .. } => source.exit_code(),
        }
    }

    /// Index of the failing trial, if the error was raised inside a batch.
    pub fn trial_index(&self) -> Option<usize> {
        match self {
            Error::Trial { trial, .. } => Some(*trial),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
