use thiserror::Error;

/// Errors produced by the isoforge library.
///
/// Variants fall into three groups that the CLI maps onto exit codes:
/// malformed input, violated preconditions, and solvers that did not converge.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("singular linear map (det = {det:e})")]
    SingularMap { det: f64 },

    #[error("invalid grid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("metric tensor is not symmetric positive definite at node ({i}, {j})")]
    NotSpd { i: usize, j: usize },

    #[error("node ({i}, {j}) maps to ({x}, {y}), outside the field domain")]
    OutsideDomain { i: usize, j: usize, x: f64, y: f64 },

    #[error("point ({x}, {y}) is not covered by the image of the grid map")]
    OutsideImage { x: f64, y: f64 },

    #[error("grid map folds at cell ({i}, {j})")]
    FoldedCell { i: usize, j: usize },

    #[error("node anisotropy {distortion} exceeds the guard {limit} at node ({i}, {j})")]
    AnisotropyGuard {
        i: usize,
        j: usize,
        distortion: f64,
        limit: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("optimizer did not converge after {iterations} iterations (best value {best})")]
    NonConvergence { iterations: usize, best: f64 },

    #[error("modulus iteration cap {rounds} reached (lower bound {lower}, upper bound {upper})")]
    IterationCap { rounds: usize, lower: f64, upper: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse(_) => ErrorKind::Parse,
            Error::NonConvergence { .. } | Error::IterationCap { .. } => ErrorKind::NonConvergence,
            _ => ErrorKind::Precondition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Precondition,
    NonConvergence,
}

pub type Result<T> = std::result::Result<T, Error>;
