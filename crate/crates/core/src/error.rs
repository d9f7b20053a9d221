use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("layout mismatch: expected dimension {expected}, found {found}")]
    LayoutMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("operator is not Hermitian (max |A - A^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("Fock cutoff escalation exceeded limit ({limit}) for mode {mode}")]
    CutoffExceeded { mode: char, limit: usize },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("search interval does not bracket the target: {0}")]
    Bracket(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
