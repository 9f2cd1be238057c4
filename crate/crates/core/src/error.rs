use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{record} has {got} keypoint values, expected {expected}")]
    KeypointCount {
        record: String,
        expected: usize,
        got: usize,
    },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },

    #[error("invalid value in {record}: {reason}")]
    InvalidRecord { record: String, reason: String },

    #[error("invalid keypoint schema: {0}")]
    InvalidSchema(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} must be positive")]
    NonPositive(&'static str),

    #[error("target similarity {0} is outside (0, 1)")]
    SimilarityOutOfRange(f64),

    #[error("ground truth {0} has no labeled keypoints")]
    NoLabeledKeypoints(u64),

    #[error("records span several images ({0} and {1})")]
    MixedImageIds(u64, u64),

    #[error("no ground truth instances to evaluate")]
    NoGroundTruth,

    #[error("invalid correction plan: {0}")]
    InvalidPlan(String),

    #[error("cannot correct a keypoint labeled {0}")]
    NotCorrectable(&'static str),

    #[error("infeasible fixture layout: {0}")]
    InfeasibleLayout(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
