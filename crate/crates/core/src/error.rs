//! Error type shared by all modules.

use core::fmt;

/// Errors reported by the solvers and linear algebra kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Vector or matrix dimensions do not match.
    DimensionMismatch { expected: usize, got: usize },
    /// A matrix required to be symmetric positive definite failed its
    /// Cholesky factorization.
    NotPositiveDefinite,
    /// A pivot fell below the singularity threshold during elimination.
    SingularMatrix,
    /// An input violated a documented precondition.
    InvalidInput(&'static str),
    /// A rational function was evaluated at (numerically) one of its poles.
    PoleHit,
    /// Requested Padé degree outside the supported range 1..=8.
    UnsupportedDegree(usize),
    /// The starting vector of a Krylov process is zero.
    ZeroInitialVector,
    /// Attempt to extend an Arnoldi process past a breakdown.
    ExtendAfterBreakdown,
    /// The time horizon is not an integer multiple of the step size, or two
    /// trajectories live on different grids.
    GridMismatch,
    /// An adaptive integrator could not meet the requested tolerance.
    ToleranceNotAchievable,
    /// An internal cross-check failed; indicates a bug, not bad input.
    InternalCheck(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Error::SingularMatrix => write!(f, "matrix is singular to working precision"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::PoleHit => write!(f, "evaluation at a pole of the rational function"),
            Error::UnsupportedDegree(s) => {
                write!(f, "unsupported Padé degree {s} (supported: 1..=8)")
            }
            Error::ZeroInitialVector => write!(f, "starting vector must be nonzero"),
            Error::ExtendAfterBreakdown => {
                write!(f, "cannot extend an Arnoldi process after breakdown")
            }
            Error::GridMismatch => write!(f, "incompatible time grid"),
            Error::ToleranceNotAchievable => {
                write!(f, "adaptive integrator could not reach the requested tolerance")
            }
            Error::InternalCheck(msg) => write!(f, "internal consistency check failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
