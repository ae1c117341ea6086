use linfa_core::LinfaError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Model(#[from] LinfaError),

    #[error("EM stopped after {iterations} iterations without converging (outputs written)")]
    NotConverged { iterations: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            CliError::Model(e) => match e {
                LinfaError::InvalidPattern(_)
                | LinfaError::InvalidData(_)
                | LinfaError::InvalidParams(_)
                | LinfaError::InvalidConfig(_)
                | LinfaError::IndexOutOfRange { .. }
                | LinfaError::Shape(_)
                | LinfaError::EmptyFold { .. }
                | LinfaError::InfeasibleEta { .. } => EXIT_USAGE,
                _ => EXIT_NUMERIC,
            },
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
