//! Number types the library evaluates over.
//!
//! Everything that touches gallery densities and gallery test maps is generic
//! over [`Scalar`], with two implementations: `f64` for search and
//! [`Rational`] (arbitrary precision) for exact verification.

use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::traits::{One, Signed, ToPrimitive, Zero};
use num::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::density::PointwiseRule;
use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Default membership guard band in float mode.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticMode {
    #[default]
    Rational,
    Float,
}

impl ArithmeticMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ArithmeticMode::Rational => "rational",
            ArithmeticMode::Float => "float",
        }
    }
}

impl std::str::FromStr for ArithmeticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" => Ok(ArithmeticMode::Rational),
            "float" => Ok(ArithmeticMode::Float),
            other => Err(Error::invalid("mode", format!("expected rational|float, got `{other}`"))),
        }
    }
}

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    const MODE: ArithmeticMode;

    /// Totally ordered, hashable image used to deduplicate values.
    type Key: Ord + Hash + Clone + Send + Sync + Debug;

    fn from_rational(r: &Rational) -> Self;
    fn from_int(i: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact rational value; `None` for non-finite floats.
    fn to_rational(&self) -> Option<Rational>;
    fn floor(&self) -> Self;
    fn abs(&self) -> Self;
    fn key(&self) -> Self::Key;
    /// Default membership tolerance for indicator densities in this mode.
    fn default_tolerance() -> Self;
    fn eval_rule(rule: &dyn PointwiseRule, x: &[Self]) -> Result<Self>;
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self>;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    const MODE: ArithmeticMode = ArithmeticMode::Float;
    type Key = u64;

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn from_int(i: i64) -> Self {
        i as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }

    fn floor(&self) -> Self {
        f64::floor(*self)
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn key(&self) -> u64 {
        // -0.0 and 0.0 share a key
        let v = if *self == 0.0 { 0.0 } else { *self };
        v.to_bits()
    }

    fn default_tolerance() -> Self {
        FLOAT_TOLERANCE
    }

    fn eval_rule(rule: &dyn PointwiseRule, x: &[Self]) -> Result<Self> {
        Ok(rule.eval_f64(x))
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::parse(n.to_string(), "not representable as f64")),
            Value::String(s) => parse_rational(s).map(|r| Self::from_rational(&r)),
            other => Err(Error::parse(other.to_string(), "expected number or string")),
        }
    }
}

impl Scalar for Rational {
    const MODE: ArithmeticMode = ArithmeticMode::Rational;
    type Key = Rational;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_int(i: i64) -> Self {
        Rational::from_integer(BigInt::from(i))
    }

    fn ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn floor(&self) -> Self {
        num::Integer::div_floor(self.numer(), self.denom()).into()
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn key(&self) -> Rational {
        self.clone()
    }

    fn default_tolerance() -> Self {
        Rational::zero()
    }

    fn eval_rule(rule: &dyn PointwiseRule, x: &[Self]) -> Result<Self> {
        rule.eval_exact(x)
            .ok_or_else(|| Error::ExactUnsupported(rule.label()))
    }

    fn to_json(&self) -> Value {
        Value::String(self.to_string())
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::String(s) => parse_rational(s),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Self::from_int(i))
                } else {
                    let f = n
                        .as_f64()
                        .ok_or_else(|| Error::parse(n.to_string(), "not a finite number"))?;
                    Rational::from_float(f).ok_or_else(|| Error::parse(n.to_string(), "not finite"))
                }
            }
            other => Err(Error::parse(other.to_string(), "expected number or string")),
        }
    }
}

/// Parses `p/q`, integers, and decimals (with optional exponent) exactly.
pub fn parse_rational(input: &str) -> Result<Rational> {
    let s = input.trim();
    if s.is_empty() {
        return Err(Error::parse(input, "empty number"));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p
            .trim()
            .parse()
            .map_err(|_| Error::parse(input, "bad numerator"))?;
        let q: BigInt = q
            .trim()
            .parse()
            .map_err(|_| Error::parse(input, "bad denominator"))?;
        if q.is_zero() {
            return Err(Error::parse(input, "zero denominator"));
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..]
                .parse()
                .map_err(|_| Error::parse(input, "bad exponent"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::parse(input, "no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::parse(input, "not a number"));
    }
    let all: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .map_err(|_| Error::parse(input, "not a number"))?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = Rational::from_integer(all);
    if scale >= 0 {
        r *= Rational::from_integer(num::pow(ten, scale as usize));
    } else {
        r /= Rational::from_integer(num::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -r } else { r })
}

/// Parses a comma-separated list of exact numbers.
pub fn parse_rational_list(input: &str) -> Result<Vec<Rational>> {
    input
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_rational)
        .collect()
}

pub fn convert<S: Scalar>(values: &[Rational]) -> Vec<S> {
    values.iter().map(S::from_rational).collect()
}
