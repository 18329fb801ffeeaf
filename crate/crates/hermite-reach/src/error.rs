use hermite_reach_core::Error as CoreError;

/// Everything that can stop a command. [`CliError::exit_code`] maps it to the
/// process status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("config {path}: {source}")]
    Config {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// `1` for numeric failures, `2` for anything the caller got wrong.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Numeric { .. } | CoreError::Eval(_)) => 1,
            _ => 2,
        }
    }
}
