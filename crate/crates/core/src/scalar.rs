use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar accepted by every numerical routine in the crate.
///
/// Implemented for `f32` and `f64` through the blanket impl below.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent finite literals.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion used for error payloads and reports.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance that is `target` in double precision but never drops
    /// below `factor` machine epsilons of the actual scalar type.
    #[inline]
    fn tol_floor(target: f64, factor: f64) -> Self {
        let eps = Self::epsilon() * Self::lit(factor);
        let t = Self::lit(target);
        if t > eps {
            t
        } else {
            eps
        }
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + LowerExp
        + Default
        + Sum
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

pub(crate) fn sup_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_floor_respects_precision() {
        assert_eq!(f64::tol_floor(1e-10, 100.0), 1e-10);
        assert!(f32::tol_floor(1e-10, 100.0) > 1e-6);
    }

    #[test]
    fn sup_abs_of_empty_is_zero() {
        assert_eq!(sup_abs::<f64>(&[]), 0.0);
        assert_eq!(sup_abs(&[1.0, -3.0, 2.0]), 3.0);
    }
}
