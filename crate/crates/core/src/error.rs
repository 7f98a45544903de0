use thiserror::Error;

/// Errors raised while building or evaluating metric pairs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeqError {
    #[error("point {point:?} lies outside the chart box")]
    OutOfChart { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?} (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eig: f64 },
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("step size underflow at t = {time}")]
    StepFailure { time: f64 },
    #[error("degenerate Jacobian (|det J| = {det:e}) at {point:?}")]
    DegenerateJacobian { point: Vec<f64>, det: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("interlacing bracket [{lo}, {hi}] failed for root {index}")]
    BracketFailure { index: usize, lo: f64, hi: f64 },
    #[error("eigenvalue functions {i} and {j} are not separated (sup {sup} >= inf {inf})")]
    SeparationViolated { i: usize, j: usize, sup: f64, inf: f64 },
    #[error("function is not positive: {0}")]
    NotPositive(String),
    #[error("pair is not realizable on any shrunk box: {0}")]
    NotRealizable(String),
    #[error("eigenvalue gap condition fails at r = {r}: sup lambda_r = {sup} >= inf lambda_r+1 = {inf}")]
    GapViolated { r: usize, sup: f64, inf: f64 },
    #[error("eigenvalue ranges of factors {left} and {right} are not ordered")]
    EigenOrderViolated { left: usize, right: usize },
    #[error("linear map is degenerate (|det A| = {0:e})")]
    DegenerateMap(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GeqError>;
