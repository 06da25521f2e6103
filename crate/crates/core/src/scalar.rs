//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the engine is generic over: `f32` for training and
/// tracking, `f64` for gradient checks and least-squares fits.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used for constants.
    fn c(v: f64) -> Self;

    fn as_f32(self) -> f32;

    fn of_f32(v: f32) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline(always)]
            fn c(v: f64) -> Self {
                v as $t
            }
            #[inline(always)]
            fn as_f32(self) -> f32 {
                self as f32
            }
            #[inline(always)]
            fn of_f32(v: f32) -> Self {
                v as $t
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Point or direction in world millimetres.
pub type Vec3<T> = [T; 3];

#[inline]
pub fn dot3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm3<T: Real>(a: &Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

#[inline]
pub fn sub3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale3<T: Real>(a: &Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn cross3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Unit vector along `a`, or `None` when `a` has zero length.
#[inline]
pub fn normalize3<T: Real>(a: &Vec3<T>) -> Option<Vec3<T>> {
    let n = norm3(a);
    if n > T::zero() && n.is_finite() {
        Some(scale3(a, T::one() / n))
    } else {
        None
    }
}

pub fn cast3<A: Real, B: Real>(a: &Vec3<A>) -> Vec3<B> {
    [B::c(a[0].to_f64().unwrap()), B::c(a[1].to_f64().unwrap()), B::c(a[2].to_f64().unwrap())]
}
