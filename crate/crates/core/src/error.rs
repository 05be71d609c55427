use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension profile: {0}")]
    InvalidProfile(String),

    #[error("profile mismatch: expected {expected:?}, found {found:?}")]
    ProfileMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid party selection: {0}")]
    InvalidParties(String),

    #[error("{name} = {value} is out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("projection has zero probability ({0:e})")]
    ZeroProbability(f64),

    #[error("missing setting {0:?}")]
    MissingSetting(Vec<usize>),

    #[error("setting {0:?} has zero total counts")]
    ZeroTotals(Vec<usize>),

    #[error("missing parity expectation for {0}")]
    MissingExpectation(String),

    #[error("scenario too large: {strategies} joint strategies exceeds cap {cap}")]
    ScenarioTooLarge { strategies: u128, cap: u128 },

    #[error("no outcome-sum residue reaches probability one for setting {0:?}")]
    NoWinningResidue(Vec<usize>),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("steering operator is not positive semidefinite (min eigenvalue {0:e})")]
    NonPsdSteering(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
