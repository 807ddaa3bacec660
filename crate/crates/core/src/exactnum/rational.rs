use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Arbitrary-precision rational, always in lowest terms with a positive
/// denominator.  Arithmetic normalizes eagerly, so two equal values are
/// structurally identical.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `p/q` from machine integers.  Panics on `q == 0`; use `from_str` for
    /// untrusted input.
    pub fn frac(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Rational(BigRational::from_integer(n))
    }

    pub fn new(numer: BigInt, denom: BigInt) -> Result<Self, Error> {
        if denom.is_zero() {
            return Err(Error::ZeroDenominator {
                literal: format!("{numer}/{denom}"),
            });
        }
        Ok(Rational(BigRational::new(numer, denom)))
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

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Multiplicative inverse.  Panics on zero; callers guard.
    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    /// Greatest integer ≤ self.
    pub fn floor_int(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Lossy conversion for plot output only; never used in computation.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::BadRational {
            literal: s.to_string(),
        };
        match s.split_once('/') {
            None => {
                let n = BigInt::from_str(s).map_err(|_| bad())?;
                Ok(Rational(BigRational::from_integer(n)))
            }
            Some((p, q)) => {
                let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
                let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
                if q.is_zero() {
                    return Err(Error::ZeroDenominator {
                        literal: s.to_string(),
                    });
                }
                Ok(Rational(BigRational::new(p, q)))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        assert!(!rhs.is_zero(), "division by zero");
        Rational(self.0 / rhs.0)
    }
}

impl Div<&Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        assert!(!rhs.is_zero(), "division by zero");
        Rational(&self.0 / &rhs.0)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_to_lowest_terms_with_positive_denominator() {
        let r = Rational::frac(4, -6);
        assert_eq!(r.to_string(), "-2/3");
        assert_eq!(r, Rational::frac(-2, 3));
    }

    #[test]
    fn parses_integer_and_fraction_forms() {
        assert_eq!("7".parse::<Rational>().unwrap(), Rational::from_int(7));
        assert_eq!("-3/9".parse::<Rational>().unwrap(), Rational::frac(-1, 3));
        assert_eq!(" 5/4 ".parse::<Rational>().unwrap(), Rational::frac(5, 4));
    }

    #[test]
    fn rejects_zero_denominator_and_garbage() {
        assert!(matches!(
            "1/0".parse::<Rational>(),
            Err(Error::ZeroDenominator { .. })
        ));
        assert!("1.5".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let vals = ["5/4", "-2/3", "0", "1000000000000000000000/7"];
        for v in vals {
            let r: Rational = v.parse().unwrap();
            let js = serde_json::to_string(&r).unwrap();
            assert_eq!(js, format!("\"{v}\""));
            let back: Rational = serde_json::from_str(&js).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn arithmetic_stays_exact() {
        let a = Rational::frac(1, 3);
        let b = Rational::frac(1, 6);
        assert_eq!(&a + &b, Rational::frac(1, 2));
        assert_eq!(&a - &b, Rational::frac(1, 6));
        assert_eq!(&a * &b, Rational::frac(1, 18));
        assert_eq!(&a / &b, Rational::from_int(2));
    }
}
