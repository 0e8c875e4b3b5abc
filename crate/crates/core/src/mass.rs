//! Weight arithmetic shared by measures, couplings and flows.
//!
//! Two representations are supported: ordinary `f64` weights, and exact
//! rationals used to adjudicate feasibility at tolerance zero.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Tolerance on total mass of a float measure.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// A float flow counts as complete when it reaches `1 - FLOW_TOL`.
pub const FLOW_TOL: f64 = 1e-9;
/// Float residual capacities at or below this are treated as saturated.
pub const RESIDUAL_EPS: f64 = 1e-15;

pub type Rational = BigRational;

pub trait Mass:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + 'static
{
    /// True for exact arithmetic.
    const EXACT: bool;

    fn to_f64(&self) -> f64;

    fn from_ratio(num: u64, den: u64) -> Self;

    /// Total mass acceptable as a probability measure.
    fn is_normalized(total: &Self) -> bool;

    /// `a <= b` up to the representation's comparison tolerance.
    fn le_tol(a: &Self, b: &Self) -> bool;

    /// `a == b` up to `tol` in float mode, exactly otherwise.
    fn close(a: &Self, b: &Self, tol: f64) -> bool;

    /// Residual capacity still usable by an augmenting path.
    fn is_positive(&self) -> bool;

    /// Weight small enough to be pruned from trajectory measures.
    fn is_negligible(&self) -> bool;

    fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

impl Mass for f64 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn is_normalized(total: &Self) -> bool {
        (total - 1.0).abs() <= NORMALIZATION_TOL
    }

    fn le_tol(a: &Self, b: &Self) -> bool {
        *a <= *b + FLOW_TOL
    }

    fn close(a: &Self, b: &Self, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn is_positive(&self) -> bool {
        *self > RESIDUAL_EPS
    }

    fn is_negligible(&self) -> bool {
        *self < 1e-12
    }
}

impl Mass for Rational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        // Ratio<BigInt>::to_f64 handles huge numerators/denominators.
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn is_normalized(total: &Self) -> bool {
        total.is_one()
    }

    fn le_tol(a: &Self, b: &Self) -> bool {
        a <= b
    }

    fn close(a: &Self, b: &Self, _tol: f64) -> bool {
        a == b
    }

    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }
}

/// Best rational approximation of a float weight, as used when a float
/// measure is promoted to exact mode. Decimal inputs like `0.1` map to the
/// obvious fraction.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    let r = num_rational::Ratio::<i64>::approximate_float(x)?;
    Some(Rational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())))
}

/// Parses `"p/q"` or a plain decimal.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.chars().all(|c| c.is_ascii_digit()) && !frac.is_empty() {
            let digits = format!("{int}{frac}");
            let num: BigInt = digits.parse().ok()?;
            let den = num_traits::pow(BigInt::from(10), frac.len());
            return Some(Rational::new(num, den));
        }
        return None;
    }
    let num: BigInt = text.parse().ok()?;
    Some(Rational::from_integer(num))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_promotion_is_exact() {
        assert_eq!(rational_from_f64(0.1).unwrap(), Rational::from_ratio(1, 10));
        assert_eq!(rational_from_f64(0.25).unwrap(), Rational::from_ratio(1, 4));
    }

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/3").unwrap(), Rational::from_ratio(1, 3));
        assert_eq!(parse_rational("0.125").unwrap(), Rational::from_ratio(1, 8));
        assert_eq!(parse_rational("2").unwrap(), Rational::from_ratio(2, 1));
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("abc").is_none());
    }

    #[test]
    fn float_tolerances() {
        assert!(f64::is_normalized(&(1.0 + 5e-13)));
        assert!(!f64::is_normalized(&(1.0 + 5e-12)));
        assert!(f64::le_tol(&(0.5 + 5e-10), &0.5));
        assert!(!f64::le_tol(&(0.5 + 5e-9), &0.5));
        assert!(!Rational::le_tol(&Rational::from_ratio(1, 2), &Rational::from_ratio(1, 3)));
    }
}
