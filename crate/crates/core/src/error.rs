use thiserror::Error;

/// Errors raised by the analysis and recovery routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("column {column} has zero norm and cannot be normalized")]
    ZeroColumn { column: usize },

    #[error("column {column} has norm {norm} (expected 1 within 1e-12); enable normalization")]
    NotUnitNorm { column: usize, norm: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate index {0}")]
    DuplicateIndex(usize),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("support columns dependent: {0}")]
    RankDeficient(String),

    #[error("system is infeasible: least-squares residual {residual:e} exceeds tolerance {tol:e}")]
    Infeasible { residual: f64, tol: f64 },

    #[error("enumeration budget of {budget} subsets exceeded")]
    BudgetExceeded { budget: u64 },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_) | Error::Infeasible { .. } | Error::BudgetExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
