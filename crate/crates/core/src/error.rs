use thiserror::Error;

/// Errors produced by volume handling, file IO, physics and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic bytes: expected \"QVOL\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {0}")]
    BadVersion(u8),

    #[error("dtype mismatch: code {code} is not a supported payload type")]
    DtypeMismatch { code: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimsMismatch(String),

    #[error("dimension overflow: {nx}x{ny}x{nz} does not fit in memory")]
    DimsOverflow { nx: usize, ny: usize, nz: usize },

    #[error("orientation vector norm {norm} is not unit length")]
    NonUnitOrientation { norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mask has no interior voxels")]
    EmptyMask,

    #[error("non-finite sample at linear index {index}")]
    NonFiniteSample { index: usize },

    #[error("conjugate gradient diverged at iteration {iter}: residual {residual:.3e}")]
    Divergence { iter: usize, residual: f64 },

    #[error("degenerate primitive: {0}")]
    DegeneratePrimitive(String),

    #[error("phantom config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
