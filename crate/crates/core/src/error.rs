use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure classes surfaced by every module of the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "unstable configuration: cfl = {cfl:.4} (limit 0.5), diffusion number = {diffusion:.4} (limit 0.25)"
    )]
    Unstable { cfl: f64, diffusion: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("numerical blow-up at cell ({i}, {j}) in variable {variable}")]
    Blowup { i: usize, j: usize, variable: &'static str },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("non-finite surrogate output at cell ({i}, {j}) in variable {variable}")]
    Rollout { i: usize, j: usize, variable: &'static str },

    #[error("{what} not found: {path}")]
    NotFound { what: &'static str, path: PathBuf },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::Unstable { .. }
            | Error::Domain(_)
            | Error::Shape(_)
            | Error::Consistency(_) => ErrorClass::Config,
            Error::Blowup { .. } | Error::Divergence { .. } | Error::Rollout { .. } => {
                ErrorClass::Numerical
            }
            Error::NotFound { .. } | Error::Parse { .. } | Error::Io { .. } => ErrorClass::Io,
            Error::AtStep { source, .. } => source.class(),
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep { step, source: Box::new(self) }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound { what: "file", path }
        } else {
            Error::Io { path, source }
        }
    }

    /// Renames the missing thing of a [`Error::NotFound`]; other errors pass through.
    pub fn missing(self, what: &'static str) -> Self {
        match self {
            Error::NotFound { path, .. } => Error::NotFound { what, path },
            other => other,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}
