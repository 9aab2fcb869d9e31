use thiserror::Error;

use crate::linalg::LinalgError;
use crate::relaxation::RelaxationSolution;

/// Invalid problem data.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("instance must have at least one user")]
    NoUsers,
    #[error("instance must have at least one transmit antenna")]
    NoAntennas,
    #[error("channel of user {user} has length {got}, expected {expected}")]
    ChannelLength {
        user: usize,
        expected: usize,
        got: usize,
    },
    #[error("channel of user {user} has a non-finite entry")]
    NonFiniteChannel { user: usize },
    #[error("channel of user {user} is identically zero")]
    ZeroChannel { user: usize },
    #[error("rate target of user {user} is {value}; targets must be finite and nonnegative")]
    InvalidTarget { user: usize, value: f64 },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("power of user {user} is {value}; powers must be finite and nonnegative")]
    InvalidPower { user: usize, value: f64 },
    #[error("not a permutation of 0..{len}: {perm:?}")]
    InvalidPermutation { len: usize, perm: Vec<usize> },
    #[error("{what} supports at most {limit} users, got {got}")]
    TooManyUsers {
        what: &'static str,
        limit: usize,
        got: usize,
    },
}

/// Failures reported by the solvers.
#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("numerical fault: {0}")]
    Linalg(#[from] LinalgError),
    #[error("inner maximization hit its iteration limit (KKT residual {residual:e})")]
    InnerIterationLimit { residual: f64 },
    #[error("ellipsoid method did not converge in {iterations} iterations (gap bound {gap:e})", iterations = .0.iterations, gap = .0.dual_gap_bound)]
    NotConverged(Box<RelaxationSolution>),
    #[error("duality system is singular at position {position}")]
    SingularDuality { position: usize },
    #[error(
        "no convex combination of admissible orders meets the targets (shortfall {shortfall:e})"
    )]
    TimeSharingInfeasible { shortfall: f64 },
}
