use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("subsystem label `{0}` appears in both operands")]
    LabelCollision(String),
    #[error("empty subsystem selection")]
    EmptySelection,
    #[error("subsystem index {index} out of range for {len} factors")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("subsystem sets overlap at index {0}")]
    Overlap(usize),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("guard exceeded: {0}")]
    GuardExceeded(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("channel has no flag sectors")]
    MissingFlags,
    #[error("unresolvable input: {0}")]
    Unresolvable(String),
    #[error("parse error: {0}")]
    Parse(String),
}
