use thiserror::Error;

/// Errors raised by the numerical geometry routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} is closer than {margin:e} to the boundary on axis {axis}")]
    Margin {
        point: Vec<f64>,
        axis: usize,
        margin: f64,
    },

    #[error("metric is degenerate at {point:?} (condition number {cond:e})")]
    Degenerate { point: Vec<f64>, cond: f64 },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("{quantity} is not constant: spread {spread:e} exceeds {tol:e}")]
    NotConstant {
        quantity: String,
        spread: f64,
        tol: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("gradient vanishes on the zero set at {point:?} (|grad w| = {grad_norm:e}); w is identically zero")]
    DegenerateZeroSet { point: Vec<f64>, grad_norm: f64 },

    #[error("{context}: residual {residual:e} exceeds tolerance {tol:e}")]
    Residual {
        context: String,
        residual: f64,
        tol: f64,
    },

    #[error("function does not split: mixed Hessian {mixed:e} exceeds {tol:e}")]
    NotDecomposable { mixed: f64, tol: f64 },

    #[error("decomposition inconsistent: max deviation {deviation:e} exceeds {tol:e}")]
    Inconsistent { deviation: f64, tol: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("mu Gram matrix has nullity {nullity} (at most one allowed)")]
    GramDegenerate { nullity: usize },

    #[error("expression error: {0}")]
    Expr(String),
}

pub type Result<T> = std::result::Result<T, Error>;
