use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("malformed nonlinearity: {0}")]
    MalformedNonlinearity(String),

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("approximation invalid: empirical error slope {empirical} exceeds eta {eta}")]
    ApproximationInvalid { empirical: f64, eta: f64 },

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("solver backend failure: {0}")]
    Backend(String),

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("point outside every cell: {0}")]
    NoCell(String),

    #[error("not Hurwitz: {0}")]
    NotHurwitz(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
