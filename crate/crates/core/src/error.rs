use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("exponent p = {0} is not allowed (need p >= 1 or p = inf)")]
    InvalidExponent(f64),

    #[error("dimension mismatch: expected d = {expected}, got d = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension d = {0} (supported: 1..=3)")]
    UnsupportedDimension(usize),

    #[error("grid too small on axis {axis}: box extent {extent} exceeds N = {size}")]
    GridTooSmall { axis: usize, extent: usize, size: usize },

    #[error("window too large on axis {axis}: extent {extent} exceeds N = {size}")]
    WindowTooLarge { axis: usize, extent: usize, size: usize },

    #[error("axis {axis} out of range for d = {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error(
        "no convergence for {what}: difference {last_diff:.3e} >= tol {tol:.3e} at grid cap N = {cap}"
    )]
    NonConvergence {
        what: String,
        cap: usize,
        tol: f64,
        last_diff: f64,
        /// The last two iterates (coarse, fine), flattened in enumeration order.
        iterates: Box<(Vec<num_complex::Complex64>, Vec<num_complex::Complex64>)>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("symbol spec error at byte {pos}: {msg}")]
    SymbolSyntax { pos: usize, msg: String },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
