use thiserror::Error;

/// Errors raised while building, composing, transforming or analysing models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("E must be diagonal (non-zero off-diagonal entry at ({row}, {col}))")]
    NonDiagonalE { row: usize, col: usize },
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),
    #[error("sE - A is singular at s = {re} + {im}j")]
    SingularAtS { re: f64, im: f64 },
    #[error("E is singular")]
    SingularE,
    #[error("inverse requires as many inputs as outputs (got {inputs} inputs, {outputs} outputs)")]
    NonSquareIO { inputs: usize, outputs: usize },
    #[error("matrix pencil (A, E) is irregular")]
    IrregularPencil,
    #[error("pencil index exceeds 2: augmented algebraic block is not left-invertible")]
    HigherIndex,
    #[error("matrix append needs at least one block")]
    EmptyGrid,
    #[error("{what} must be strictly positive and finite (got {value})")]
    NonPositiveValue { what: String, value: f64 },
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("mode {0} is defective or repeated; it cannot be normalized")]
    DefectiveMode(usize),
    #[error("mode {0} is virtual (infinite) or out of range")]
    VirtualModeRequested(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown branch kind `{0}`")]
    UnknownBranchKind(String),
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
