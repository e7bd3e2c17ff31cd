//! Arbitrary-precision rationals used for every quantity that decides dynamics.
//!
//! `ExactScalar` is a thin newtype over [`BigRational`]. Values are always kept
//! in lowest terms with a positive denominator, so structural equality is
//! numeric equality and hashing is consistent with it.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseScalarError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal {0:?}")]
    Invalid(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ExactScalar(BigRational);

impl ExactScalar {
    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Self(BigRational::from_integer(BigInt::from(n)))
    }

    /// `numer / denom`; panics on a zero denominator.
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Self(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_bigints(numer: BigInt, denom: BigInt) -> Option<Self> {
        if denom.is_zero() {
            None
        } else {
            Some(Self(BigRational::new(numer, denom)))
        }
    }

    /// `2^-k`.
    pub fn pow2_recip(k: u32) -> Self {
        Self(BigRational::new(BigInt::one(), BigInt::one() << k))
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Self(self.0.abs())
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        if self.0.is_positive() {
            1
        } else if self.0.is_negative() {
            -1
        } else {
            0
        }
    }

    pub fn checked_div(&self, rhs: &Self) -> Option<Self> {
        if rhs.is_zero() {
            None
        } else {
            Some(Self(&self.0 / &rhs.0))
        }
    }

    pub fn recip(&self) -> Option<Self> {
        Self::one().checked_div(self)
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    pub fn midpoint(&self, other: &Self) -> Self {
        (self + other) / Self::from_integer(2)
    }

    pub fn min_of<'a>(&'a self, other: &'a Self) -> &'a Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max_of<'a>(&'a self, other: &'a Self) -> &'a Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Largest `2^-k` (k ≥ 0) not exceeding `self`, or `None` when `self` is
    /// not positive. Values ≥ 1 map to 1.
    pub fn pow2_floor(&self) -> Option<(u32, Self)> {
        if !self.is_positive() {
            return None;
        }
        if *self >= Self::one() {
            return Some((0, Self::one()));
        }
        // 2^-k ≤ p/q  ⇔  q ≤ p·2^k
        let p = self.numer();
        let q = self.denom();
        let mut k = (q.bits() as i64 - p.bits() as i64).max(0) as u32;
        while (p << k) < *q {
            k += 1;
        }
        while k > 0 && (p << (k - 1)) >= *q {
            k -= 1;
        }
        Some((k, Self::pow2_recip(k)))
    }

    /// Lossy conversion for reporting and plotting only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Canonical `p/q` rendering (denominator always present).
    pub fn to_canonical_string(&self) -> String {
        format!("{}/{}", self.0.numer(), self.0.denom())
    }
}

impl From<i64> for ExactScalar {
    fn from(n: i64) -> Self {
        Self::from_integer(n)
    }
}

impl From<BigRational> for ExactScalar {
    fn from(r: BigRational) -> Self {
        Self(r)
    }
}

impl FromStr for ExactScalar {
    type Err = ParseScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseScalarError::Empty);
        }
        let parse_int = |part: &str| -> Result<BigInt, ParseScalarError> {
            let part = part.trim();
            let digits = part.strip_prefix(['-', '+']).unwrap_or(part);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ParseScalarError::Invalid(s.to_string()));
            }
            part.parse::<BigInt>()
                .map_err(|_| ParseScalarError::Invalid(s.to_string()))
        };
        match s.split_once('/') {
            None => Ok(Self(BigRational::from_integer(parse_int(s)?))),
            Some((n, d)) => {
                let n = parse_int(n)?;
                let d = parse_int(d)?;
                if d.is_zero() {
                    return Err(ParseScalarError::ZeroDenominator(s.to_string()));
                }
                Ok(Self(BigRational::new(n, d)))
            }
        }
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for ExactScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_canonical_string())
    }
}

impl<'de> Deserialize<'de> for ExactScalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($Trait:ident, $method:ident, $op:tt) => {
        impl $Trait<ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $method(self, rhs: ExactScalar) -> ExactScalar {
                ExactScalar(self.0 $op rhs.0)
            }
        }
        impl<'a> $Trait<&'a ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $method(self, rhs: &'a ExactScalar) -> ExactScalar {
                ExactScalar(self.0 $op &rhs.0)
            }
        }
        impl<'a> $Trait<ExactScalar> for &'a ExactScalar {
            type Output = ExactScalar;
            fn $method(self, rhs: ExactScalar) -> ExactScalar {
                ExactScalar(&self.0 $op rhs.0)
            }
        }
        impl<'a, 'b> $Trait<&'b ExactScalar> for &'a ExactScalar {
            type Output = ExactScalar;
            fn $method(self, rhs: &'b ExactScalar) -> ExactScalar {
                ExactScalar(&self.0 $op &rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);
// Panics on division by zero, like the underlying rational type; use
// `checked_div` where the divisor is not known to be nonzero.
forward_binop!(Div, div, /);

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar(-self.0)
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar(-&self.0)
    }
}

impl AddAssign<&ExactScalar> for ExactScalar {
    fn add_assign(&mut self, rhs: &ExactScalar) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&ExactScalar> for ExactScalar {
    fn sub_assign(&mut self, rhs: &ExactScalar) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&ExactScalar> for ExactScalar {
    fn mul_assign(&mut self, rhs: &ExactScalar) {
        self.0 *= &rhs.0;
    }
}

impl std::iter::Sum for ExactScalar {
    fn sum<I: Iterator<Item = ExactScalar>>(iter: I) -> Self {
        iter.fold(ExactScalar::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a ExactScalar> for ExactScalar {
    fn sum<I: Iterator<Item = &'a ExactScalar>>(iter: I) -> Self {
        iter.fold(ExactScalar::zero(), |acc, x| acc + x)
    }
}

/// Integer division helper used by grid placement: `⌊a / b⌋` for positive `b`.
pub(crate) fn floor_div(a: &ExactScalar, b: &ExactScalar) -> BigInt {
    let q = a / b;
    let (n, d) = (q.numer().clone(), q.denom().clone());
    n.div_floor(&d)
}

/// Compares `|a|` with `|b|` without allocating twice.
pub fn cmp_abs(a: &ExactScalar, b: &ExactScalar) -> Ordering {
    a.0.abs().cmp(&b.0.abs())
}

/// Shorthand used throughout tests and examples: `q(3, 10)` is `3/10`.
pub fn q(numer: i64, denom: i64) -> ExactScalar {
    ExactScalar::new(numer, denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_canonically() {
        let x: ExactScalar = "6/-4".parse().unwrap();
        assert_eq!(x, q(-3, 2));
        assert_eq!(x.to_string(), "-3/2");
        let y: ExactScalar = "7".parse().unwrap();
        assert_eq!(y.to_string(), "7/1");
        assert!("1/0".parse::<ExactScalar>().is_err());
        assert!("1.5".parse::<ExactScalar>().is_err());
        assert!("".parse::<ExactScalar>().is_err());
        assert!("/3".parse::<ExactScalar>().is_err());
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let x = q(-22, 7);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "\"-22/7\"");
        let back: ExactScalar = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn pow2_floor_brackets_value() {
        for (n, d) in [(1, 3), (1, 1024), (5, 1024), (7, 2), (1, 1)] {
            let x = q(n, d);
            let (k, p) = x.pow2_floor().unwrap();
            assert!(p <= x);
            if k > 0 {
                assert!(&p * ExactScalar::from_integer(2) > x);
            }
        }
        assert!(ExactScalar::zero().pow2_floor().is_none());
    }

    #[test]
    fn checked_division() {
        assert!(q(1, 2).checked_div(&ExactScalar::zero()).is_none());
        assert_eq!(q(1, 2).checked_div(&q(1, 4)).unwrap(), ExactScalar::from_integer(2));
        assert_eq!(floor_div(&q(-7, 2), &ExactScalar::one()), BigInt::from(-4));
    }
}
