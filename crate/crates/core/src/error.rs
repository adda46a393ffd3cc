use thiserror::Error;

/// Errors raised by distribution construction, masking and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight at index {index} is not positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("index {index} out of bounds for {side} of size {len}")]
    IndexOutOfBounds {
        side: &'static str,
        index: usize,
        len: usize,
    },

    #[error("{side} index {index} appears in more than one keypoint pair")]
    DuplicateKeypoint { side: &'static str, index: usize },

    #[error("keypoint pair ({source_index}, {target_index}) has unequal masses p={source_mass} q={target_mass}")]
    MassMismatchAtKeypoint {
        source_index: usize,
        target_index: usize,
        source_mass: f64,
        target_mass: f64,
    },

    #[error("masked polytope is empty: free row mass {row_mass} vs free column mass {col_mass}")]
    InfeasibleMask { row_mass: f64, col_mass: f64 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("relation scores need at least one keypoint")]
    EmptyKeypoints,

    #[error("divergence {divergence} cannot be used with {mode} relation rows")]
    IncompatibleMode {
        divergence: &'static str,
        mode: &'static str,
    },

    #[error("relation row {0} is not a probability vector")]
    NonSimplexRow(usize),

    #[error("solver stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error("keypoint mass {keypoint_mass} on the {side} side is not strictly below the budget {budget}")]
    KeypointMassExceedsBudget {
        side: &'static str,
        keypoint_mass: f64,
        budget: f64,
    },

    #[error("mass budget {budget} outside [0, {max}]")]
    InvalidMassBudget { budget: f64, max: f64 },

    #[error("dummy corner offset must be positive, got {0}")]
    NonPositiveA(f64),

    #[error("augmented solution violates the partial constraints: {0}")]
    TheoremViolation(String),

    #[error("eta must lie in [0, 1), got {0}")]
    InvalidEta(f64),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
