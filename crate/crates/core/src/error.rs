use thiserror::Error;

/// Errors raised by the workbench.
///
/// The variants map onto the three failure classes the command line front
/// end distinguishes: malformed or inconsistent input, exhausted resource
/// caps, and numerical non-convergence.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An element, vector or representation does not match the oracle or ambient space it was used with.
    #[error("structural error: {0}")]
    Structural(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("resource cap `{cap}` ({limit}) exceeded: {detail}")]
    Resource {
        cap: &'static str,
        limit: usize,
        detail: String,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no convergence after {iterations} iterations (best Rayleigh quotient {best})")]
    NoConvergence { iterations: usize, best: f64 },
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn structural(message: impl Into<String>) -> Self {
        Error::Structural(message.into())
    }

    pub(crate) fn precondition(message: impl Into<String>) -> Self {
        Error::Precondition(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
