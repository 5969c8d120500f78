//! Exact dyadic rationals `numerator / 2^exponent`.
//!
//! Every measure that appears in this crate (interval lengths, local masses,
//! Carleson ratios, cell-set measures) is a dyadic rational, so a single
//! `i128` numerator with a binary exponent is enough to keep all of them exact.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DyadicError;

/// A dyadic rational in canonical form: the numerator is odd, or the value
/// is zero with exponent zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DyadicRational {
    numerator: i128,
    exponent: u32,
}

impl DyadicRational {
    pub const ZERO: DyadicRational = DyadicRational {
        numerator: 0,
        exponent: 0,
    };
    pub const ONE: DyadicRational = DyadicRational {
        numerator: 1,
        exponent: 0,
    };

    pub fn new(numerator: i128, exponent: u32) -> Self {
        let mut value = DyadicRational {
            numerator,
            exponent,
        };
        value.canonicalize();
        value
    }

    pub fn from_integer(n: i128) -> Self {
        DyadicRational {
            numerator: n,
            exponent: 0,
        }
    }

    /// `2^k` for any integer `k`.
    pub fn pow2(k: i32) -> Self {
        if k >= 0 {
            DyadicRational::from_integer(1i128 << k)
        } else {
            DyadicRational {
                numerator: 1,
                exponent: k.unsigned_abs(),
            }
        }
    }

    pub fn numerator(&self) -> i128 {
        self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    fn canonicalize(&mut self) {
        if self.numerator == 0 {
            self.exponent = 0;
            return;
        }
        let shift = self.numerator.trailing_zeros().min(self.exponent);
        self.numerator >>= shift;
        self.exponent -= shift;
    }

    /// Numerator of `self` written over `2^exponent`; requires `exponent >= self.exponent`.
    fn numerator_at(&self, exponent: u32) -> i128 {
        let shift = exponent - self.exponent;
        self.numerator
            .checked_mul(1i128 << shift)
            .expect("dyadic rational overflow")
    }

    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    pub fn is_integer(&self) -> bool {
        self.exponent == 0
    }

    pub fn is_negative(&self) -> bool {
        self.numerator < 0
    }

    pub fn abs(self) -> Self {
        DyadicRational {
            numerator: self.numerator.abs(),
            exponent: self.exponent,
        }
    }

    /// Multiplies by `2^k`.
    pub fn scale_pow2(self, k: i32) -> Self {
        if self.is_zero() {
            return self;
        }
        if k >= 0 {
            let k = k as u32;
            if k <= self.exponent {
                DyadicRational {
                    numerator: self.numerator,
                    exponent: self.exponent - k,
                }
            } else {
                let lifted = self
                    .numerator
                    .checked_mul(1i128 << (k - self.exponent))
                    .expect("dyadic rational overflow");
                DyadicRational::from_integer(lifted)
            }
        } else {
            DyadicRational::new(self.numerator, self.exponent + k.unsigned_abs())
        }
    }

    pub fn half(self) -> Self {
        self.scale_pow2(-1)
    }

    pub fn floor(&self) -> i128 {
        self.numerator >> self.exponent
    }

    pub fn ceil(&self) -> i128 {
        let f = self.floor();
        if self.is_integer() {
            f
        } else {
            f + 1
        }
    }

    pub fn to_f64(&self) -> f64 {
        // `i128 as f64` rounds correctly; scaling by a power of two is exact.
        self.numerator as f64 * 2f64.powi(-(self.exponent as i32))
    }

    /// Exact conversion; every finite `f64` is a dyadic rational.
    pub fn from_f64(x: f64) -> Result<Self, DyadicError> {
        if !x.is_finite() {
            return Err(DyadicError::NotDyadic(x.to_string()));
        }
        if x == 0.0 {
            return Ok(DyadicRational::ZERO);
        }
        let bits = x.to_bits();
        let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mantissa, exp2) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), raw_exp - 1075)
        };
        if exp2 > 70 {
            return Err(DyadicError::Overflow);
        }
        Ok(DyadicRational::new(sign * mantissa, 0).scale_pow2(exp2))
    }

    /// Integer `n` with `self * 2^resolution = n`, if that product is integral.
    pub fn cells_at(&self, resolution: u32) -> Option<i128> {
        let scaled = self.scale_pow2(resolution as i32);
        scaled.is_integer().then_some(scaled.numerator)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exponent.max(other.exponent);
        self.numerator_at(e).cmp(&other.numerator_at(e))
    }
}

impl Add for DyadicRational {
    type Output = DyadicRational;
    fn add(self, rhs: Self) -> Self {
        let e = self.exponent.max(rhs.exponent);
        let n = self
            .numerator_at(e)
            .checked_add(rhs.numerator_at(e))
            .expect("dyadic rational overflow");
        DyadicRational::new(n, e)
    }
}

impl Sub for DyadicRational {
    type Output = DyadicRational;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for DyadicRational {
    type Output = DyadicRational;
    fn neg(self) -> Self {
        DyadicRational {
            numerator: -self.numerator,
            exponent: self.exponent,
        }
    }
}

impl Mul for DyadicRational {
    type Output = DyadicRational;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        let n = self
            .numerator
            .checked_mul(rhs.numerator)
            .expect("dyadic rational overflow");
        DyadicRational::new(n, self.exponent + rhs.exponent)
    }
}

impl AddAssign for DyadicRational {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for DyadicRational {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl Sum for DyadicRational {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(DyadicRational::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a DyadicRational> for DyadicRational {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

impl From<i64> for DyadicRational {
    fn from(n: i64) -> Self {
        DyadicRational::from_integer(n as i128)
    }
}

/// Canonical text form `num/2^k`.
impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.exponent)
    }
}

/// Accepts `num/2^k`, `num/den` with `den` a power of two, integers, and
/// finite decimals whose value is dyadic (`0.75`, `-1.5`).
impl FromStr for DyadicRational {
    type Err = DyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || DyadicError::NotDyadic(s.to_string());
        if let Some((num, den)) = s.split_once('/') {
            let num: i128 = num.trim().parse().map_err(|_| bad())?;
            let den = den.trim();
            let exponent = if let Some(k) = den.strip_prefix("2^") {
                k.parse::<u32>().map_err(|_| bad())?
            } else {
                let d: u128 = den.parse().map_err(|_| bad())?;
                if d == 0 || !d.is_power_of_two() {
                    return Err(bad());
                }
                d.trailing_zeros()
            };
            if exponent > 120 {
                return Err(DyadicError::Overflow);
            }
            return Ok(DyadicRational::new(num, exponent));
        }
        if let Some((int, frac)) = s.split_once('.') {
            let negative = int.trim_start().starts_with('-');
            let digits = frac.len() as u32;
            if digits > 30 || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let int_part: i128 = match int.trim_start_matches(['-', '+']) {
                "" => 0,
                t => t.parse().map_err(|_| bad())?,
            };
            let frac_part: i128 = if frac.is_empty() {
                0
            } else {
                frac.parse().map_err(|_| bad())?
            };
            let pow5 = 5i128.pow(digits);
            let mut scaled = int_part * 10i128.pow(digits) + frac_part;
            if negative {
                scaled = -scaled;
            }
            // value = scaled / (2^d 5^d), dyadic iff 5^d divides `scaled`.
            if scaled % pow5 != 0 {
                return Err(bad());
            }
            return Ok(DyadicRational::new(scaled / pow5, digits));
        }
        let n: i128 = s.parse().map_err(|_| bad())?;
        Ok(DyadicRational::from_integer(n))
    }
}

impl Serialize for DyadicRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DyadicRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form() {
        let x = DyadicRational::new(12, 4);
        assert_eq!((x.numerator(), x.exponent()), (3, 2));
        let z = DyadicRational::new(0, 9);
        assert_eq!(z, DyadicRational::ZERO);
        assert_eq!(z.exponent(), 0);
        assert_eq!(DyadicRational::new(8, 2), DyadicRational::from_integer(2));
    }

    #[test]
    fn parsing_forms() {
        assert_eq!(q("3/2^2"), DyadicRational::new(3, 2));
        assert_eq!(q("3/4"), DyadicRational::new(3, 2));
        assert_eq!(q("0.75"), DyadicRational::new(3, 2));
        assert_eq!(q("-1.5"), DyadicRational::new(-3, 1));
        assert_eq!(q("7"), DyadicRational::from_integer(7));
        assert!("0.1".parse::<DyadicRational>().is_err());
        assert!("1/3".parse::<DyadicRational>().is_err());
        assert!("abc".parse::<DyadicRational>().is_err());
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(q("11/2").ceil(), 6);
        assert_eq!(q("11/2").floor(), 5);
        assert_eq!(q("5").ceil(), 5);
        assert_eq!(q("-3/2").floor(), -2);
        assert_eq!(q("-3/2").ceil(), -1);
    }

    #[test]
    fn f64_round_trip_is_exact() {
        for x in [0.1, 1.0 / 3.0, -2.5, 1e-30, 6.02e18] {
            assert_eq!(DyadicRational::from_f64(x).unwrap().to_f64(), x);
        }
    }

    fn arb() -> impl Strategy<Value = DyadicRational> {
        (-(1i128 << 40)..(1i128 << 40), 0u32..40).prop_map(|(n, e)| DyadicRational::new(n, e))
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(x in arb()) {
            prop_assert_eq!(x.to_string().parse::<DyadicRational>().unwrap(), x);
        }

        #[test]
        fn field_laws(a in arb(), b in arb(), c in arb()) {
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!(a * (b + c), a * b + a * c);
            prop_assert_eq!(a - a, DyadicRational::ZERO);
            prop_assert!(((a + b).to_f64() - (a.to_f64() + b.to_f64())).abs() <= 1e-12 * (1.0 + a.to_f64().abs() + b.to_f64().abs()));
        }

        #[test]
        fn order_agrees_with_f64(a in arb(), b in arb()) {
            prop_assert_eq!(a.cmp(&b), a.to_f64().partial_cmp(&b.to_f64()).unwrap());
        }
    }
}
