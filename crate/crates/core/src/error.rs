use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stratum {stratum} has items but no annotations")]
    UnsampledStratum { stratum: usize },

    #[error("degenerate allocation: every stratum has zero variance")]
    DegenerateAllocation,

    #[error("recall is undefined: no true positives and no estimated false negatives")]
    UndefinedRecall,

    #[error("precision target is undefined for a zero prevalence estimate")]
    UndefinedTarget,

    #[error("inconsistent counts: {}", .0.join("; "))]
    Inconsistent(Vec<String>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown item id {0:?}")]
    UnknownItem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Inconsistent(_)
            | Error::Parse { .. }
            | Error::UnknownItem(_)
            | Error::Json(_) => 2,
            Error::UnsampledStratum { .. }
            | Error::DegenerateAllocation
            | Error::UndefinedRecall
            | Error::UndefinedTarget => 3,
            Error::Io(_) => 4,
        }
    }
}
