//! Dense and banded linear algebra kernels specialized for the Q-geometry.
//!
//! Everything here is desk-scale and dependency-free: banded storage with a
//! pivoted LU solve (real and complex), small dense LU, a Jacobi symmetric
//! eigensolver, the skew-matrix exponential, and [`QSpace`] carrying the
//! Q-inner product and energy.

mod banded;
mod dense;
mod eigen;
mod expm;
mod qspace;
mod scalar;

pub use banded::BandedMatrix;
pub use dense::{DenseMatrix, LuFactors};
pub use eigen::{spectral_norm, sym_eigen};
pub use expm::small_skew_expm;
pub use qspace::{QSpace, SymBanded};
pub use scalar::Scalar;
