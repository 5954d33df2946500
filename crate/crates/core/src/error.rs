use thiserror::Error;

/// Crate-wide result type.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used to map failures onto process exit codes:
/// validation-type errors exit 1, numeric failures exit 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parameter,
    Validation,
    Domain,
    Resolution,
    State,
    Config,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    /// A call-site argument is outside its documented range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A model/kernel/grid violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested operation is undefined for these inputs.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Monte Carlo budget cannot resolve the requested quantile.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Required state (e.g. retained increments) is missing.
    #[error("state error: {0}")]
    State(String),

    /// Configuration file problems; may aggregate several messages.
    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// The configuration is structurally valid but unsupported
    /// (e.g. repeated CARMA roots).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Numeric failure (quadrature non-convergence, degenerate spread, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) => ErrorKind::Parameter,
            Error::Validation(_) => ErrorKind::Validation,
            Error::Domain(_) => ErrorKind::Domain,
            Error::Resolution(_) => ErrorKind::Resolution,
            Error::State(_) => ErrorKind::State,
            Error::Config(_) | Error::Unsupported(_) => ErrorKind::Config,
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Io(_) | Error::Serde(_) => ErrorKind::Io,
        }
    }

    /// Process exit code: 1 for validation-type failures, 2 for numeric ones.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Numeric => 2,
            _ => 1,
        }
    }
}
