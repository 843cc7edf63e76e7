//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], implemented for `f32` and
//! `f64`. Complex amplitudes are `num_complex::Complex<T>`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub use num_complex::Complex;

/// Floating point type the library is generic over.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Sum
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in target float")
    }

    /// Converts a count or index into `Self`.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in target float")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] field.
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn czero<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::zero())
}

/// `e^{i theta}`.
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Cplx<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Squared Euclidean norm of a complex slice.
pub fn norm_sqr<T: Real>(v: &[Cplx<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `<a|b>` with the first argument conjugated.
pub fn inner<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

/// `a <- a + s b`.
pub(crate) fn axpy<T: Real>(a: &mut [Cplx<T>], s: Cplx<T>, b: &[Cplx<T>]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x = *x + s * y;
    }
}
