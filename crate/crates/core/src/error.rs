use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tridiagonal system is not solvable: pivot {pivot:e} at row {row}")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("time {t} does not coincide with a master grid node (step {step})")]
    Misaligned { t: f64, step: f64 },

    #[error("alignment: {0}")]
    Alignment(String),

    #[error("invalid time mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("malformed CSV at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
