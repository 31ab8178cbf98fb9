use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spin quantum number {0} is not a half-integer in [0, 5/2]")]
    InvalidSpin(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what} index {index} out of range (have {len})")]
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
    #[error("unknown state label `{0}`")]
    UnknownLabel(String),
    #[error("state label `{0}` needs a nuclear part (e.g. `S|+`) when nuclei are present")]
    MissingNuclearState(String),
    #[error("state is not normalized (squared norm or weight sum {0})")]
    NotNormalized(f64),
    #[error("coherence measure {0} exceeds 1 beyond rounding tolerance")]
    CoherenceOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
