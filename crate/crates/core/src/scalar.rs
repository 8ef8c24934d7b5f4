//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the analysis is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into this type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64`, used by file writers and reports.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative tolerance used by iterative solvers at this precision.
    #[inline]
    fn solver_tol() -> Self {
        Self::epsilon().powf(Self::lit(0.7))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over [`Real`].
pub type Cplx<T> = Complex<T>;

/// Maps an angle to the half-open interval (-pi, pi].
#[inline]
pub fn wrap_phase<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = x - two_pi * ((x + T::PI()) / two_pi).floor();
    // y is now in [-pi, pi)
    if y <= -T::PI() {
        y += two_pi;
    }
    y
}

/// Maps an angle to [0, 2 pi).
#[inline]
pub fn wrap_positive<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let y = x - two_pi * (x / two_pi).floor();
    if y >= two_pi {
        T::zero()
    } else {
        y
    }
}

/// Euclidean norm of a complex vector.
pub fn cnorm<T: Real>(v: &[Cplx<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Hermitian inner product `a^H b`.
pub fn cdot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter()
        .zip(b)
        .fold(Cplx::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        })
}
