use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("series is not hourly: {0}")]
    NonHourlyCadence(String),
    #[error("insufficient history: need {needed} days, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input at position {0}")]
    NonFiniteInput(usize),
    #[error("non-finite model output")]
    NonFiniteModelOutput,
    #[error("training loss diverged at epoch {0}")]
    DivergedLoss(usize),
    #[error("too few instances: need at least {needed}, got {got}")]
    TooFewInstances { needed: usize, got: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("exact Shapley enumeration supports at most {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },
    #[error("partition does not match features: {0}")]
    PartitionMismatch(String),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("group `{0}` is not a full 24-hour block of one super-variable")]
    NotHourlyGroup(String),
    #[error("no data")]
    EmptyData,
    #[error("lines do not share one grid")]
    GridMismatch,
    #[error("empty tensor")]
    EmptyTensor,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("naive forecast has zero error")]
    ZeroNaiveError,
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
