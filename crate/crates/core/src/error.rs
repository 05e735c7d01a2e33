use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlmError {
    #[error("invalid knot partition: {0}")]
    InvalidPartition(String),

    #[error("t = {t} lies outside the basis domain [{lower}, {upper}]{}", row_suffix(*.row))]
    OutOfDomain {
        t: f64,
        lower: f64,
        upper: f64,
        row: Option<usize>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inner linear system is singular (condition estimate {condition:.3e})")]
    SolverFailure { condition: f64 },

    #[error("objective became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error(
        "column '{name}' (index {index}) is explained by the spline in the nonparametric covariate; \
         residual standard deviation {residual_sd:.3e}"
    )]
    DegenerateColumn {
        name: String,
        index: usize,
        residual_sd: f64,
    },

    #[error("GCV undefined: effective degrees of freedom {df} >= n = {n}")]
    GcvUndefined { df: f64, n: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),
}

fn row_suffix(row: Option<usize>) -> String {
    match row {
        Some(r) => format!(" (row {r})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, PlmError>;
