use thiserror::Error;

/// Errors raised by matrix programs, constructions and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {op} got {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix (1-based)")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("row selector targets row {0} more than once")]
    DuplicateTargetRow(usize),

    #[error("column selector targets column {0} more than once")]
    DuplicateTargetColumn(usize),

    #[error("specification out of range: {0}")]
    SpecOutOfRange(String),

    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("ragged rows: row {row} has {got} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("multi-head block has no heads")]
    EmptyHeads,

    #[error("singular system: pivot {pivot:e} in column {col}")]
    SingularSystem { col: usize, pivot: f64 },

    #[error("pipeline state layout does not match the module weights: {0}")]
    LayoutMismatch(String),

    #[error("bad knot spec: {0}")]
    BadKnotSpec(String),

    #[error("pivot below tolerance at position {index}: |{pivot:e}| < {tolerance:e}")]
    PivotBelowTolerance {
        index: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("singular system detected: {0}")]
    SingularDetected(String),

    #[error("bad problem: {0}")]
    BadProblem(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Variant name, for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DuplicateTargetRow(_) => "DuplicateTargetRow",
            Error::DuplicateTargetColumn(_) => "DuplicateTargetColumn",
            Error::SpecOutOfRange(_) => "SpecOutOfRange",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::RaggedRows { .. } => "RaggedRows",
            Error::NonFinite { .. } => "NonFinite",
            Error::EmptyHeads => "EmptyHeads",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::LayoutMismatch(_) => "LayoutMismatch",
            Error::BadKnotSpec(_) => "BadKnotSpec",
            Error::PivotBelowTolerance { .. } => "PivotBelowTolerance",
            Error::SingularDetected(_) => "SingularDetected",
            Error::BadProblem(_) => "BadProblem",
            Error::Parse(_) => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
