use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
/// Internal failure, or a Monte Carlo run whose bands did not all pass.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
/// Configuration, usage or input parse error.
pub const EXIT_CONFIG: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: row {row}, column {column}: {msg}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        msg: String,
    },
    #[error("{0}")]
    NotConverged(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] mlp_logdet::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Parse { .. } => EXIT_CONFIG,
            CliError::NotConverged(_) | CliError::Core(mlp_logdet::Error::AllRestartsFailed(_)) => {
                EXIT_NOT_CONVERGED
            }
            CliError::Core(mlp_logdet::Error::DimensionMismatch { .. })
            | CliError::Core(mlp_logdet::Error::InvalidArgument(_)) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Core(_) => EXIT_FAILURE,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}
