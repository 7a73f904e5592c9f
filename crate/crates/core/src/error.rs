use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure classes reported by a completion provider.
#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider rejected the echo/logprobs request: {0}")]
    Rejected(String),
    #[error("top-k {requested} exceeds provider limit {limit}")]
    UnsupportedTopK { requested: usize, limit: usize },
    #[error("rate limit still exceeded after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed provider payload: {0}")]
    Payload(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("no probability mass left to allocate (p_rest = {0:e})")]
    DegenerateMass(f64),
    #[error("all positions are deterministic, curvature variance is zero")]
    DegenerateVariance,
    #[error("passage has no scored positions")]
    EmptyPassage,
    #[error("population has an empty class")]
    EmptyPopulation,
    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingDiverged { epoch: usize, reason: String },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("format version mismatch: expected {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("missing ground-truth distribution: {0}")]
    MissingTruth(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
