use std::fmt;

use thiserror::Error;

/// A state of the multidimensional game written with 1-based coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLabel(pub Vec<usize>);

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("size limit exceeded: {entries} entries requested, cap is {cap}")]
    Size { entries: u128, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not substochastic: row {row} {detail}")]
    NotSubstochastic { row: usize, detail: String },

    #[error("state {index} is not absorbing")]
    NotAbsorbing { index: usize },

    #[error("invalid birth-death spec: {0}")]
    InvalidSpec(String),

    #[error("invalid game spec: {0}")]
    InvalidGame(String),

    #[error("mixture is not stochastic: entry ({row}, {col}) = {value:e}")]
    NotStochastic { row: usize, col: usize, value: f64 },

    #[error("transient states do not form a communication class: {0}")]
    Communication(String),

    #[error("index {index} out of range (size {size})")]
    Index { index: usize, size: usize },

    #[error("chain is not stochastically monotone: {0}")]
    Monotonicity(String),

    #[error("spectrum has a negative eigenvalue {value:e} in dimension {dim}")]
    NegativeSpectrum { dim: usize, value: f64 },

    #[error("degenerate spectrum in dimension {dim}: eigenvalue {value} too close to 1")]
    DegenerateSpectrum { dim: usize, value: f64 },

    #[error("pure-birth dual has negative entry {value:e} at state {state}, move set {moves:?}")]
    Nonnegativity {
        state: StateLabel,
        moves: Vec<usize>,
        value: f64,
    },

    #[error("matrix-valued mixing coefficients are not supported by {0}")]
    MatrixCoefficients(&'static str),

    #[error("wrong case: {0}")]
    WrongCase(String),

    #[error("start state {0} is out of range")]
    StartOutOfRange(String),

    #[error("horizon of {steps} steps reached with residual mass {residual:e}")]
    Horizon { steps: usize, residual: f64 },

    #[error("negative probability mass {value:e} at t = {t}")]
    NegativeMass { t: usize, value: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("coupling unavailable: {0}")]
    CouplingUnavailable(String),

    #[error("numeric guard: {0}")]
    NumericGuard(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
