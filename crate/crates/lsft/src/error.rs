use thiserror::Error;

/// Errors surfaced by feature transformations, solvers, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric: max asymmetry {max_asym:e} exceeds {tol:e}")]
    NotSymmetric { max_asym: f64, tol: f64 },

    #[error("eigensolver failed to converge after {sweeps} sweeps: off-diagonal residual {residual:e}")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("singular whitening: {0}")]
    Singular(String),

    #[error("zero style gram: style feature has no second moment")]
    ZeroStyleGram,

    #[error("degenerate gradient: all cubic coefficients are zero")]
    DegenerateGradient,

    #[error("no positive cubic root found (a={a:e}, b={b:e}, c={c:e}, d={d:e})")]
    NoPositiveRoot { a: f64, b: f64, c: f64, d: f64 },

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("iteration {iteration} failed: {source}")]
    IterationFailed {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("layer {layer} failed: {source}")]
    LayerFailed {
        layer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing layer: {0}")]
    MissingLayer(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("bad magic: not an FTZ file")]
    BadMagic,

    #[error("truncated FTZ file: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("FTZ size mismatch: header declares {declared} payload bytes, file holds {actual}")]
    SizeMismatch { declared: usize, actual: usize },

    #[error("unknown FTZ dtype tag {0}")]
    UnknownDtype(u8),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
