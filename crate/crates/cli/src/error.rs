use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// A rejected configuration key or flag.
    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Core(#[from] spinforge::Error),

    /// A figure or selftest check outside its tolerance.
    #[error("invariant failed: {0}")]
    Invariant(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// 0 ok, 1 i/o, 2 config, 3 numeric failure, 4 cutoff limit.
    pub fn exit_code(&self) -> i32 {
        use spinforge::Error as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(E::InvalidParameter { .. } | E::Layout(_) | E::LayoutMismatch { .. }) => 2,
            CliError::Core(E::CutoffExceeded { .. }) => 4,
            CliError::Core(_) | CliError::Invariant(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
