//! Coefficient types for the symbolic layer.
//!
//! Expressions are exact when the coefficient type is exact (`Ratio<i64>`),
//! which lets constraint generation be checked without rounding noise.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Coef:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether `self` should be treated as zero next to values of size `scale`.
    fn negligible(&self, scale: &Self) -> bool;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact `num / den`.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer coefficient")
            / Self::from_i64(den).expect("integer coefficient")
    }

    /// Converts a float parameter; rational types use the nearest simple fraction.
    fn from_param(x: f64) -> Self {
        Self::from_f64(x).expect("finite parameter")
    }
}

impl Coef for f64 {
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-13 * scale.abs()
    }
}

impl Coef for Ratio<i64> {
    fn negligible(&self, _scale: &Self) -> bool {
        *self == Self::from_integer(0)
    }

    fn from_param(x: f64) -> Self {
        // Parameters in tests are short decimals; recover them exactly.
        let scaled = (x * 1e6).round() as i64;
        Ratio::new(scaled, 1_000_000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_params_are_exact() {
        let r = <Ratio<i64> as Coef>::from_param(0.8);
        assert_eq!(r, Ratio::new(4, 5));
        assert_eq!(<Ratio<i64> as Coef>::ratio(2, 6), Ratio::new(1, 3));
    }
}
