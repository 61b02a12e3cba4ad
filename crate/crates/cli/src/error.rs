use thiserror::Error;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] relperf_core::Error),
    /// The instance has no constant equilibrium; the report is still written.
    #[error("no constant equilibrium (psi = {psi})")]
    NoEquilibrium { psi: f64 },
    /// At least one verification check failed; the report is still written.
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NoEquilibrium { .. } => 2,
            CliError::Core(relperf_core::Error::NoEquilibrium { .. }) => 2,
            CliError::VerifyFailed(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
