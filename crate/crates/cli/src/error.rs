use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] kpt_diagnose::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

impl ReportError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReportError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for I/O failures, 3 when there is no ground truth to evaluate and
    /// 2 for everything else (bad input or usage).
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Io { .. } | ReportError::Csv(_) => 1,
            ReportError::Core(kpt_diagnose::Error::Io { .. }) => 1,
            ReportError::Core(kpt_diagnose::Error::NoGroundTruth) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = ReportError> = std::result::Result<T, E>;
