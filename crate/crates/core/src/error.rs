use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Columns of a delay basis (or any tall matrix) are too close to
    /// collinear for a least-squares separation.
    #[error("matrix is not identifiable: condition number {condition:.3e} exceeds {limit:.1e}")]
    Identifiability { condition: f64, limit: f64 },

    #[error("singular system: {0}")]
    Singular(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
