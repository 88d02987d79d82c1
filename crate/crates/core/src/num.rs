//! Scalar abstraction shared by the physics modules.
//!
//! Everything that integrates or evaluates physics is written against
//! [`Real`], so the same code runs in `f32` for quick sweeps and in `f64`
//! for the reference numbers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the solver.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly
    /// rounded) in the supported types, so this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `sqrt(pi / (4 ln 2))`: area of a unit-peak Gaussian with unit FWHM.
pub fn gaussian_area_factor<T: Real>() -> T {
    (T::PI() / (T::lit(4.0) * T::LN_2())).sqrt()
}

/// Returns `true` when every value is finite.
pub fn all_finite<T: Real>(values: &[T]) -> bool {
    values.iter().all(|v| v.is_finite())
}
