use thiserror::Error;

/// Errors raised by the numerics, ENN and agent layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("epistemic index kind mismatch: expected {expected}, got {got}")]
    IndexKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("joint prediction over {outcomes} outcomes exceeds the enumeration guard of {limit}")]
    EnumerationTooLarge { outcomes: u128, limit: u128 },
    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: u64, loss: f64 },
    #[error("invalid action {action} for an environment with {count} actions")]
    InvalidAction { action: usize, count: usize },
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("replay buffer is empty")]
    EmptyBuffer,
}

pub type Result<T> = std::result::Result<T, Error>;
