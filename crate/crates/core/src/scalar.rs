//! Scalar types the lattice arithmetic is generic over.
//!
//! Floating types are the everyday choice. `BigRational` exists because binary
//! floats cannot represent a chaotic orbit of the doubling map: every `f64` is a
//! dyadic rational, so `2x mod 1` reaches `0` after at most 53 doublings.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Arithmetic needed by circle points, local maps and interactions.
pub trait Scalar:
    Num + Signed + PartialOrd + Clone + Debug + Display + Send + Sync + 'static
{
    /// Largest integer not greater than `self`.
    fn floor(&self) -> Self;

    /// Lossless for floats and exact for rationals; panics on NaN or infinity.
    fn from_f64(value: f64) -> Self;

    fn to_f64(&self) -> f64;

    /// Values this close below 1 are snapped to 0 after reduction mod 1.
    ///
    /// `None` for exact types, which never need snapping.
    fn wrap_snap() -> Option<Self>;

    /// `numerator / denominator` in this scalar type.
    fn ratio(numerator: i64, denominator: i64) -> Self {
        Self::from_i64(numerator) / Self::from_i64(denominator)
    }

    fn from_i64(value: i64) -> Self;

    fn half() -> Self {
        Self::ratio(1, 2)
    }
}

macro_rules! float_scalar {
    ($t:ty, $snap:expr) => {
        impl Scalar for $t {
            #[inline]
            fn floor(&self) -> Self {
                <$t>::floor(*self)
            }

            #[inline]
            fn from_f64(value: f64) -> Self {
                assert!(value.is_finite(), "non-finite scalar {value}");
                value as $t
            }

            #[inline]
            fn to_f64(&self) -> f64 {
                *self as f64
            }

            #[inline]
            fn wrap_snap() -> Option<Self> {
                Some($snap)
            }

            #[inline]
            fn from_i64(value: i64) -> Self {
                value as $t
            }
        }
    };
}

float_scalar!(f64, 1e-15);
float_scalar!(f32, 1e-7);

impl Scalar for BigRational {
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }

    fn from_f64(value: f64) -> Self {
        BigRational::from_float(value).unwrap_or_else(|| panic!("non-finite scalar {value}"))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn wrap_snap() -> Option<Self> {
        None
    }

    fn from_i64(value: i64) -> Self {
        BigRational::from_integer(BigInt::from_i64(value).expect("i64 fits BigInt"))
    }
}
