//! Exact decimal numbers limited to 20 significant digits.
//!
//! Every arithmetic result is rounded half-to-even to [`PRECISION`]
//! significant digits. Division computes the quotient exactly to one digit
//! past the precision and uses the remainder as a sticky bit, so rounding is
//! exact as well.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const PRECISION: u32 = 20;

/// `mantissa * 10^-scale`, normalized: no trailing zeros in the mantissa,
/// and zero is always `0 * 10^0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Decimal {
    mantissa: BigInt,
    scale: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal literal `{0}`")]
pub struct ParseDecimalError(pub String);

fn pow10(n: u32) -> BigInt {
    BigInt::from(10u8).pow(n)
}

fn digit_count(m: &BigInt) -> u32 {
    if m.is_zero() {
        1
    } else {
        m.abs().to_str_radix(10).len() as u32
    }
}

impl Decimal {
    pub fn zero() -> Self {
        Decimal { mantissa: BigInt::zero(), scale: 0 }
    }

    fn from_parts(mantissa: BigInt, scale: i64) -> Self {
        Self::round(mantissa, scale, false)
    }

    fn normalize(mut mantissa: BigInt, mut scale: i64) -> Self {
        if mantissa.is_zero() {
            return Decimal::zero();
        }
        let ten = BigInt::from(10u8);
        loop {
            let (q, r) = mantissa.div_rem(&ten);
            if !r.is_zero() {
                break;
            }
            mantissa = q;
            scale -= 1;
        }
        Decimal { mantissa, scale }
    }

    /// Round to PRECISION significant digits, half-to-even. `sticky` marks a
    /// nonzero tail already discarded below the last digit of `mantissa`.
    fn round(mantissa: BigInt, scale: i64, sticky: bool) -> Self {
        let digits = digit_count(&mantissa);
        if digits <= PRECISION && !sticky {
            return Self::normalize(mantissa, scale);
        }
        let drop = digits.saturating_sub(PRECISION);
        if drop == 0 {
            // sticky tail below a value that already fits: it is below half an ulp
            return Self::normalize(mantissa, scale);
        }
        let negative = mantissa.is_negative();
        let magnitude = mantissa.abs();
        let divisor = pow10(drop);
        let (mut q, r) = magnitude.div_rem(&divisor);
        let twice = &r * 2u8;
        let round_up = match twice.cmp(&divisor) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => sticky || q.is_odd(),
        };
        if round_up {
            q += 1u8;
        }
        let q = if negative { -q } else { q };
        Self::normalize(q, scale - drop as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, i64) {
        let scale = self.scale.max(other.scale);
        let a = &self.mantissa * pow10((scale - self.scale) as u32);
        let b = &other.mantissa * pow10((scale - other.scale) as u32);
        (a, b, scale)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b, scale) = self.aligned(other);
        Self::from_parts(a + b, scale)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b, scale) = self.aligned(other);
        Self::from_parts(a - b, scale)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_parts(&self.mantissa * &other.mantissa, self.scale + other.scale)
    }

    /// `None` on division by zero.
    pub fn div(&self, other: &Self) -> Option<Self> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Decimal::zero());
        }
        let negative = self.mantissa.sign() != other.mantissa.sign();
        let num = self.mantissa.abs();
        let den = other.mantissa.abs();
        let extra = (PRECISION + 1 + digit_count(&den)).saturating_sub(digit_count(&num));
        let (q, r) = (num * pow10(extra)).div_rem(&den);
        let q = if negative { -q } else { q };
        Some(Self::round(q, self.scale - other.scale + extra as i64, !r.is_zero()))
    }

    pub fn neg(&self) -> Self {
        Decimal { mantissa: -self.mantissa.clone(), scale: self.scale }
    }

    /// Lossy conversion for HTTP payloads.
    pub fn to_f64(&self) -> f64 {
        self.to_string().parse().unwrap_or(f64::NAN)
    }

    pub fn from_i64(v: i64) -> Self {
        Self::normalize(BigInt::from(v), 0)
    }
}

impl FromStr for Decimal {
    type Err = ParseDecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDecimalError(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        if body.contains('.') && frac_part.is_empty() {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let mantissa = BigInt::parse_bytes(digits.as_bytes(), 10).ok_or_else(err)?;
        let mantissa = if negative { -mantissa } else { mantissa };
        Ok(Self::from_parts(mantissa, frac_part.len() as i64))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.mantissa.abs().to_str_radix(10);
        let sign = if self.mantissa.sign() == Sign::Minus { "-" } else { "" };
        if self.scale <= 0 {
            let zeros = "0".repeat((-self.scale) as usize);
            return write!(f, "{sign}{digits}{zeros}");
        }
        let scale = self.scale as usize;
        if digits.len() > scale {
            let (i, frac) = digits.split_at(digits.len() - scale);
            write!(f, "{sign}{i}.{frac}")
        } else {
            let pad = "0".repeat(scale - digits.len());
            write!(f, "{sign}0.{pad}{digits}")
        }
    }
}

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Decimal({self})")
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for Decimal {
    fn from(v: i64) -> Self {
        Decimal::from_i64(v)
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Default for Decimal {
    fn default() -> Self {
        Decimal::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display_normalize() {
        assert_eq!(d("12").to_string(), "12");
        assert_eq!(d("12.500").to_string(), "12.5");
        assert_eq!(d("-0.0012").to_string(), "-0.0012");
        assert_eq!(d("000100").to_string(), "100");
        assert_eq!(d("-0").to_string(), "0");
        assert_eq!(d(".5").to_string(), "0.5");
        assert!("1.".parse::<Decimal>().is_err());
        assert!("".parse::<Decimal>().is_err());
        assert!("1e5".parse::<Decimal>().is_err());
        assert!("--1".parse::<Decimal>().is_err());
    }

    #[test]
    fn percentage_arithmetic_is_exact() {
        let pct = d("1200").div(&d("10000")).unwrap().mul(&d("100"));
        assert_eq!(pct, d("12"));
        let pct = d("1500.01").div(&d("10000")).unwrap().mul(&d("100"));
        assert_eq!(pct.to_string(), "15.0001");
        assert!(pct > d("15"));
        assert_eq!(d("0.1").add(&d("0.2")), d("0.3"));
    }

    #[test]
    fn division_rounds_half_even_at_twenty_digits() {
        // 1/3 = 0.33333333333333333333|33..
        assert_eq!(d("1").div(&d("3")).unwrap().to_string(), "0.33333333333333333333");
        // 2/3 rounds up in the last place
        assert_eq!(d("2").div(&d("3")).unwrap().to_string(), "0.66666666666666666667");
        assert_eq!(d("-2").div(&d("3")).unwrap().to_string(), "-0.66666666666666666667");
        assert!(d("5").div(&d("0")).is_none());
    }

    #[test]
    fn round_half_even_on_exact_ties() {
        // 21 significant digits ending in 5: tie goes to the even neighbour.
        assert_eq!(d("12345678901234567890.5").to_string(), "12345678901234567890");
        assert_eq!(d("12345678901234567891.5").to_string(), "12345678901234567892");
        // sticky tail below the tie breaks it upward
        assert_eq!(d("12345678901234567890.51").to_string(), "12345678901234567891");
    }

    #[test]
    fn product_of_wide_operands_is_rounded() {
        let a = d("12345678901234567890");
        let p = a.mul(&a);
        // 152415787532388367501905199875019052100 -> 20 digits
        assert_eq!(p.to_string(), "152415787532388367500000000000000000000");
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(m in -10_i128.pow(20)..10_i128.pow(20), scale in 0u32..25) {
            let s = if scale == 0 { m.to_string() } else {
                let neg = m < 0;
                let digits = m.unsigned_abs().to_string();
                let digits = format!("{:0>width$}", digits, width = scale as usize + 1);
                let (i, f) = digits.split_at(digits.len() - scale as usize);
                format!("{}{}.{}", if neg { "-" } else { "" }, i, f)
            };
            let v = d(&s);
            prop_assert_eq!(d(&v.to_string()), v);
        }

        #[test]
        fn small_integer_arithmetic_matches_i128(a in -1_000_000i64..1_000_000, b in -1_000_000i64..1_000_000) {
            let (x, y) = (Decimal::from(a), Decimal::from(b));
            prop_assert_eq!(x.add(&y), Decimal::from(a + b));
            prop_assert_eq!(x.sub(&y), Decimal::from(a - b));
            prop_assert_eq!(x.mul(&y), Decimal::from(a * b));
            prop_assert_eq!(x.cmp(&y), a.cmp(&b));
            if b != 0 && a % b == 0 {
                prop_assert_eq!(x.div(&y).unwrap(), Decimal::from(a / b));
            }
        }
    }
}
