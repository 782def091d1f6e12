//! Energy-preserving iterative solvers for Gauss collocation integration of
//! Poisson systems with quadratic energy.
//!
//! A Poisson system `dy/dt = J(y) Q y` with skew-symmetric structure matrix
//! `J` and symmetric positive definite `Q` conserves the energy
//! `H(y) = y^T Q y / 2` along exact solutions. Gauss collocation integrators
//! inherit this conservation, but only if the implicit systems arising at
//! each step are solved exactly. This crate provides iterative solvers whose
//! *individual iterates* already conserve the energy, so the iteration can be
//! stopped at any accuracy without breaking conservation:
//!
//! - [`krylov`]: the Q-Arnoldi approximation (QAA) of the Gauss step
//!   `y1 = R_s(hJQ) y0` for linear systems, in two algebraically equivalent
//!   variants, plus an exponential Arnoldi iteration and a standard GMRES
//!   baseline for comparison.
//! - [`nonlinear`]: fixed-point and BFGS-type solvers for the implicit
//!   midpoint rule applied to state-dependent `J(y)`, built on the Cayley
//!   transform so that every energy-bearing iterate has the exact Q-norm.
//! - [`pade`]: diagonal Padé approximations of the exponential (the stability
//!   functions of the Gauss integrators), their partial fraction data and
//!   Lipschitz constants.
//! - [`stepping`]: time integration drivers, order-consistent stopping,
//!   reference solutions and error norms.
//! - [`models`]: benchmark problems (mass-spring chain, free rigid body).
//! - [`linalg`]: the small dense/banded kernels everything above rests on.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! enables wall-clock timing in iteration traces and `std::error::Error`
//! integration.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub(crate) mod math;

pub mod linalg;
pub mod models;
pub mod nonlinear;
pub mod pade;
pub mod stepping;

pub mod krylov;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
