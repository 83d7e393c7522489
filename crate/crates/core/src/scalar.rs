//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the simulator is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self;

    /// A tolerance of `base`, clamped so it never drops below what this
    /// precision can resolve (64 ulps around one).
    fn tol(base: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        let base = Self::lit(base);
        if base > floor {
            base
        } else {
            floor
        }
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
}

/// Complex amplitude over the chosen scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// `sqrt(n)` for an integer index.
#[inline]
pub(crate) fn sqrt_usize<T: Real>(n: usize) -> T {
    T::lit(n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_clamped_for_single_precision() {
        assert_eq!(f64::tol(1e-12), 1e-12);
        assert!(f32::tol(1e-12) > 1e-6);
    }
}
