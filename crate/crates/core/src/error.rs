use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty payload")]
    EmptyPayload,
    #[error("spreading factor {0} outside 7..=12")]
    InvalidSpreadingFactor(u8),
    #[error("empty {0} set")]
    EmptySet(&'static str),
    #[error("bandit needs at least one arm")]
    NoArms,
    #[error("arm index {index} out of range ({count} arms)")]
    ArmOutOfRange { index: usize, count: usize },
    #[error("weight overflow")]
    WeightOverflow,
    #[error("probability {0} must lie in (0, 1]")]
    InvalidProbability(f64),
    #[error("singular at origin")]
    SingularAtOrigin,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mismatched horizons: {0} vs {1}")]
    MismatchedHorizon(usize, usize),
    #[error("unknown preset `{name}` (valid: {valid})")]
    UnknownPreset { name: String, valid: String },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
