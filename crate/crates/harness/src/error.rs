use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] enn_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    /// Input data that cannot be analysed as asked.
    #[error("{0}")]
    Data(String),
    /// Some runs of a sweep failed; the rows of the others were written.
    #[error("{failed} of {total} runs failed; first failure: {first}")]
    Runs { failed: usize, total: usize, first: String },
}

pub type Result<T> = std::result::Result<T, HarnessError>;
