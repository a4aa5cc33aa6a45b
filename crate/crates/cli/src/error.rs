use thiserror::Error;

/// Errors surfaced by the command line, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input, flags or configuration. Exit code 1.
    #[error("validation error: {0}")]
    Validation(String),
    /// A stage failed on valid input. Exit code 2.
    #[error("computation error: {0}")]
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Computation(_) => 2,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn computation(msg: impl Into<String>) -> Self {
        CliError::Computation(msg.into())
    }
}

impl From<scopula::Error> for CliError {
    fn from(e: scopula::Error) -> Self {
        use scopula::Error as E;
        match e {
            E::Parse { .. } | E::Duplicate { .. } | E::Domain(_) | E::Config(_) | E::Index(_) | E::Io(_) | E::Csv(_) => {
                CliError::Validation(e.to_string())
            }
            E::InsufficientData(_) | E::Degenerate(_) | E::Numerical(_) | E::AllFailed(_) => CliError::Computation(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
