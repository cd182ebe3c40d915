use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("{suite}/{step}: {source}")]
    Compute {
        suite: &'static str,
        step: &'static str,
        #[source]
        source: stobeam_core::Error,
    },
    #[error("cannot emit plot data: {0}")]
    EmptyTable(String),
    #[error("report: {0}")]
    Report(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Invalid(_) => 2,
            _ => 1,
        }
    }
}

/// Attaches suite and step context to a core error.
pub trait Context<T> {
    fn during(self, suite: &'static str, step: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for stobeam_core::Result<T> {
    fn during(self, suite: &'static str, step: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Compute { suite, step, source })
    }
}
