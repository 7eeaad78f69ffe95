use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point has non-positive depth {0} mm")]
    NonPositiveDepth(f64),
    #[error("bounding box has zero area")]
    ZeroArea,
    #[error("image extent must be positive, got {0} px")]
    ZeroExtent(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("joint count mismatch: expected {expected}, found {found}")]
    JointCountMismatch { expected: usize, found: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no RANSAC trial reached a consensus of {0} inliers")]
    NoConsensus(usize),
    #[error("joint mask selects no joints")]
    EmptyMask,
    #[error("groundtruth pose has zero spatial variance")]
    DegenerateGt,
    #[error("empty input set")]
    EmptySet,
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("curve needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("input is constant; correlation undefined")]
    ConstantInput,
    #[error("could not place person inside the image after {0} attempts")]
    PlacementFailure(usize),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
