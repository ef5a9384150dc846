use thiserror::Error;

/// Failures of an experiment run, grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<reshape_ot::Error> for CliError {
    fn from(e: reshape_ot::Error) -> Self {
        use reshape_ot::Error as E;
        match e {
            E::InvalidInput(_) => CliError::Config(e.to_string()),
            E::Data { .. } | E::DataFormat(_) | E::Io(_) | E::NonFinite(_) => CliError::Data(e.to_string()),
            E::Numerical(_) | E::DimensionMismatch(_) | E::InfeasibleMarginals(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("I/O: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("CSV output: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("JSON output: {e}"))
    }
}
