use std::path::PathBuf;

use thiserror::Error;

/// Bad flags or config; maps to exit status 2.
#[derive(Debug, Error)]
pub enum UsageError {
    #[error("no command given; expected one of verify, learn, shadows, scaling, twirl, norms")]
    MissingCommand,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error("{0}")]
    Core(#[from] qudit_learn_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        use qudit_learn_core::Error as E;
        match self {
            RunError::Core(E::TheoryViolation { .. } | E::ImaginaryResidue(_) | E::Decomposition { .. }) => 1,
            RunError::Serialize(_) => 1,
            _ => 2,
        }
    }
}
