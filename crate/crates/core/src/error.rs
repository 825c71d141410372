use thiserror::Error;

/// Errors produced by validation, evaluation and construction routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("empty matrix (K must be at least 1)")]
    Empty,

    #[error("direct gain h[{index},{index}] must be real and strictly positive, got {re}{im:+}i")]
    NonPositiveDiagonal { index: usize, re: f64, im: f64 },

    #[error("entry ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian at ({row},{col})")]
    NotHermitian { row: usize, col: usize },

    #[error("diagonal entry {index} is not 1")]
    NotUnitDiagonal { index: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("schema error at '{pointer}': {message}")]
    Schema { pointer: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for K={k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("|rho| = {magnitude} exceeds the cap 1 - 1e-6")]
    RhoTooLarge { magnitude: f64 },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("label `{0}` appears in more than one argument set")]
    LabelOverlap(String),

    #[error("label set must not be empty")]
    EmptyLabelSet,

    #[error("covariance is singular (min pivot {min_pivot:e})")]
    SingularCovariance { min_pivot: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("{what} exceeds the supported cap ({value} > {cap})")]
    TooLarge {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("degradedness witness failed: max residual {residual:e}")]
    WitnessFailure { residual: f64 },

    #[error("condition violated: {0}")]
    ConditionViolated(String),

    #[error("h[{index},{index}] = a_k conj(b_k) is not real and strictly positive")]
    NonStandardDiagonal { index: usize },

    #[error("|a| must be sorted in nondecreasing order (violated at index {index})")]
    NotSorted { index: usize },

    #[error("invalid power split: {0}")]
    BetaInvalid(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
