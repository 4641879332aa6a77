use cavmix_core::CoreError;

use crate::newton::SolveTrace;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    /// Factorization failed or produced an unusable solution.
    #[error("linear solve failed: {0}")]
    Linear(String),
    /// Newton stopped without meeting the tolerance; the trace is attached.
    #[error("no convergence: {reason}")]
    NonConvergence {
        reason: String,
        trace: Box<SolveTrace>,
    },
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 config, 2 mesh, 3 solver, 4 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(CoreError::Config(_))
            | Error::Config(_)
            | Error::Parse(_)
            | Error::Io(_) => 1,
            Error::Core(CoreError::Geometry(_)) | Error::Core(CoreError::Strategy(_)) => 2,
            Error::Core(CoreError::Orientation { .. })
            | Error::Core(CoreError::Domain(_))
            | Error::Linear(_)
            | Error::NonConvergence { .. } => 3,
            Error::Analysis(_) => 4,
        }
    }
}
