//! Scalar abstraction so the banded solver runs on real and complex numbers
//! from a single code path.

use core::fmt::Debug;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::math;

/// Field element usable in the elimination kernels.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    const ZERO: Self;
    const ONE: Self;

    /// Modulus |x|, used for pivot selection and singularity thresholds.
    fn modulus(self) -> f64;

    /// Embed a real number.
    fn from_re(x: f64) -> Self;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn modulus(self) -> f64 {
        math::abs(self)
    }

    #[inline]
    fn from_re(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);

    #[inline]
    fn modulus(self) -> f64 {
        math::hypot(self.re, self.im)
    }

    #[inline]
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}
