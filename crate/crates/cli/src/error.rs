use thiserror::Error;

/// Failure classes, each with its own exit status.
///
/// | status | meaning |
/// |--------|---------|
/// | 0 | success |
/// | 2 | invalid configuration or arguments |
/// | 3 | numeric failure |
/// | 4 | I/O failure |
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<ghzkit::Error> for CliError {
    fn from(e: ghzkit::Error) -> Self {
        use ghzkit::Error as E;
        let msg = e.to_string();
        match e {
            E::Io(_) | E::Json(_) | E::Csv(_) => Self::Io(msg),
            E::Config(inner) => Self::Config(inner),
            E::InvalidProfile(_)
            | E::OutOfRange { .. }
            | E::ShapeMismatch(_)
            | E::Parse { .. }
            | E::ScenarioTooLarge { .. }
            | E::InvalidParties(_)
            | E::MissingSetting(_)
            | E::ProfileMismatch { .. }
            | E::LengthMismatch { .. } => Self::Config(msg),
            _ => Self::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
