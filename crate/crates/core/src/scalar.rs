use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the probability math is written against.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Slack allowed when checking that a distribution sums to one.
    ///
    /// About 1e-12 for `f64`, 5e-4 for `f32`.
    fn normalization_tol() -> Self {
        Self::epsilon() * Self::lit(4096.0)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_tol_fits_requirements() {
        assert!(f64::normalization_tol() <= 1e-12);
        assert!(f32::normalization_tol() < 1e-3);
    }
}
