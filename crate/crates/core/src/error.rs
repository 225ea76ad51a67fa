use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("degenerate triangulation after {attempts} attempts")]
    DegenerateTriangulation { attempts: usize },

    #[error("effective stiffness matrix is singular or not positive definite")]
    SingularSystem,

    #[error("time integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("assembly defect: eigenvalue {value:e} below tolerance {tolerance:e}")]
    AssemblyDefect { value: f64, tolerance: f64 },

    #[error("crack leaves {particles} particle(s) in components without a fixed DOF")]
    FloatingComponent { particles: usize },

    #[error("corrupted sample `{id}`: {reason}")]
    Corruption { id: String, reason: String },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("missing prediction for sample `{0}`")]
    MissingPrediction(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse failure class, used by front ends to pick exit codes.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Corruption { .. } => ErrorClass::Io,
            Error::SingularSystem
            | Error::Divergence { .. }
            | Error::AssemblyDefect { .. }
            | Error::FloatingComponent { .. }
            | Error::DegenerateTriangulation { .. } => ErrorClass::Numerical,
            Error::InvalidArgument { .. }
            | Error::ShapeMismatch { .. }
            | Error::Format { .. }
            | Error::MissingPrediction(_)
            | Error::Config(_) => ErrorClass::Config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}
