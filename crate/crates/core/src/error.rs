use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid symbol {found:?} at index {index}")]
    InvalidSymbol { index: usize, found: char },
    #[error("unbalanced path: up step at index {index} is never matched")]
    Unbalanced { index: usize },
    #[error("path dips below the axis at index {index}")]
    NegativePrefix { index: usize },
    #[error("m = {m} exceeds the configured cap of {cap}")]
    CapExceeded { m: usize, cap: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("tree has no edges")]
    EmptyTree,
    #[error("unbalanced parentheses at byte {index}")]
    UnbalancedParens { index: usize },
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
    #[error("unknown parameter set {0:?}")]
    UnknownParameterSet(String),
    #[error("parameter file: {0}")]
    ParameterFile(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("detailed balance violated between states {x} and {y}: |pi(x)P(x,y) - pi(y)P(y,x)| = {discrepancy:e}")]
    BalanceViolation { x: usize, y: usize, discrepancy: f64 },
    #[error("chain has a single state; spectral gap requires m >= 1")]
    DegenerateStateSpace,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("block {0} is empty")]
    EmptyBlock(usize),
    #[error("blocks do not partition the state space: {0}")]
    NotAPartition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
