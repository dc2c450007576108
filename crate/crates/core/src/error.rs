//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by grid operations, material laws and solvers.
///
/// The variants map onto the CLI exit codes: `Schema` → 2,
/// `Hypothesis` → 3, `Convergence` → 4. Everything else is a plain
/// failure (exit 1).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two signals (or a signal and an operator) disagree on grid,
    /// weight or state dimension. These are programming errors on the
    /// caller's side, never data-dependent.
    #[error("structural mismatch: {0}")]
    Mismatch(String),

    /// An argument violates a documented precondition (non-positive
    /// step, invalid breakpoint ordering, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Scenario input failed validation. `field` names the offending
    /// entry so the CLI can point at it.
    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    /// The positivity estimate came out non-positive: the problem is
    /// outside the well-posedness class and the solver refuses to run.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// An iteration failed to converge. Diagnostics that were
    /// collected up to the failure point travel with the report, not
    /// with the error.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A per-step linear system was singular or a factorization failed.
    #[error("linear algebra failure: {0}")]
    Linear(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }

    pub fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence(msg.into())
    }

    pub fn linear(msg: impl Into<String>) -> Self {
        Error::Linear(msg.into())
    }

    /// Exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. } => 2,
            Error::Hypothesis(_) => 3,
            Error::Convergence(_) => 4,
            _ => 1,
        }
    }
}
