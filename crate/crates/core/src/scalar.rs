use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};

/// Floating-point type the geometry, path and Fourier code is generic over.
///
/// Tolerances scale with the precision of the type: f64 uses the nominal
/// 1e-9 rad merge tolerance, f32 a tolerance a few ulps above its epsilon at 2π.
pub trait Scalar:
    Float + FloatConst + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Angular distance below which two atoms are the same point.
    fn merge_tol() -> Self;
    /// Allowed deviation of a probability measure's total mass from 1.
    fn mass_tol() -> Self;

    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("literal representable in scalar type")
    }

    fn from_usize(n: usize) -> Self {
        <Self as num_traits::NumCast>::from(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    fn tau() -> Self {
        Self::TAU()
    }
}

impl Scalar for f64 {
    fn merge_tol() -> Self {
        1e-9
    }
    fn mass_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn merge_tol() -> Self {
        5e-6
    }
    fn mass_tol() -> Self {
        1e-5
    }
}
