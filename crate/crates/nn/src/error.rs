use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown parameter tensor `{0}`")]
    UnknownTensor(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dims {dims:?} not divisible by 2^{levels} pooling levels")]
    DimsNotPoolable { dims: [usize; 3], levels: usize },

    #[error("orientation required when orientation-adaptive blocks are enabled")]
    MissingOrientation,

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {value}")]
    NonFiniteLoss { epoch: usize, step: usize, value: f64 },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error(transparent)]
    Core(#[from] qsm_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
