use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimsMismatch(Vec<usize>, Vec<usize>),

    #[error("invalid dimensions {0:?}: expected 2 or 3 positive extents")]
    InvalidDims(Vec<usize>),

    #[error("label volume contains reserved label 0")]
    ZeroLabel,

    #[error("unknown region id {0}")]
    UnknownRegion(u32),

    #[error("no edge between regions {0} and {1}")]
    MissingEdge(u32, u32),

    #[error("cannot merge region {0} with itself")]
    SelfMerge(u32),

    #[error("value {0} outside [0, 1]")]
    ValueOutOfRange(f64),

    #[error("channel {0:?} not found")]
    MissingChannel(String),

    #[error("duplicate channel name {0:?}")]
    DuplicateChannel(String),

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("invalid quartile {0}: expected 25, 50, 75 or 100")]
    InvalidQuartile(u8),

    #[error("empty contingency table")]
    EmptyTable,

    #[error("need at least 2 voxels for pair counting, got {0}")]
    TooFewVoxels(u64),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("training set contains a single class")]
    SingleClass,

    #[error("feature vector length {got} does not match forest ({expected})")]
    FeatureLengthMismatch { got: usize, expected: usize },

    #[error("confidence {0} is not a finite value in [0, 1]")]
    InvalidConfidence(f64),

    #[error("invalid threshold {0}: expected a value in [0, 1]")]
    InvalidThreshold(f64),

    #[error("edge {0}-{1} is not a mitochondria-cytoplasm edge")]
    NotMitoCytoEdge(u32, u32),

    #[error("no watershed seeds: every voxel is at or above the seed threshold")]
    NoSeeds,

    #[error("invalid synthesis parameters: {0}")]
    InvalidSynthParams(String),

    #[error("bad magic bytes: expected \"SEGV\"")]
    BadMagic,

    #[error("unsupported format version {0}")]
    BadVersion(u8),

    #[error("unsupported dtype code {0}")]
    BadDtype(u8),

    #[error("payload size mismatch: header implies {expected} bytes, file has {got}")]
    PayloadSizeMismatch { expected: usize, got: usize },

    #[error("expected {expected} volume, file contains {got}")]
    WrongVolumeKind {
        expected: &'static str,
        got: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
