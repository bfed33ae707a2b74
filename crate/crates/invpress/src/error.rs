use crate::config::ConfigError;

/// Failures of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: invpress_core::Error,
    },

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn core(stage: &'static str) -> impl FnOnce(invpress_core::Error) -> CliError {
        move |source| CliError::Core { stage, source }
    }

    /// 0 success, 2 configuration, 3 not admissible at the resolution,
    /// 4 violated theorem hypothesis, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use invpress_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core { source, .. } => match source {
                E::Config(_) => 2,
                E::NotAdmissible { .. } | E::VacuousBound => 3,
                E::NotPeriodic { .. } => 4,
                e if e.is_precondition() => 4,
                _ => 1,
            },
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
