//! Exact rationals and extended nonnegative reals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Nonnegative rational number with 64-bit numerator and denominator.
pub type Rational = Ratio<u64>;

/// Parses `"3/2"`, `"2"` or a plain decimal like `"1.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: u64 = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("unsupported decimal {s:?}"));
        }
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| format!("bad decimal {s:?}"))?
        };
        let den = 10u64.pow(frac.len() as u32);
        let f: u64 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(f))
            .ok_or_else(|| format!("decimal {s:?} out of range"))?;
        return Ok(Rational::new(num, den));
    }
    s.parse::<u64>()
        .map(Rational::from_integer)
        .map_err(|_| format!("cannot parse {s:?} as a rational"))
}

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Three-way comparison of `a/b` against `c/d` without overflow.
pub fn cmp_fractions(a: u64, b: u64, c: u64, d: u64) -> Ordering {
    (a as u128 * d as u128).cmp(&(c as u128 * b as u128))
}

/// Three-valued verdict for statements that finite evidence may not settle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tri {
    Yes,
    No,
    Undetermined,
}

impl Tri {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Tri::Yes
        } else {
            Tri::No
        }
    }
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tri::Yes => "yes",
            Tri::No => "no",
            Tri::Undetermined => "undetermined",
        })
    }
}

/// Extended nonnegative real: an exact rational, a floating value, or `+inf`.
#[derive(Clone, Copy, Debug)]
pub enum ExtValue {
    Rational(Rational),
    Real(f64),
    Infinite,
}

impl ExtValue {
    pub const ZERO: ExtValue = ExtValue::Rational(Ratio::new_raw(0, 1));

    pub fn ratio(num: u64, den: u64) -> Self {
        ExtValue::Rational(Rational::new(num, den))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtValue::Rational(r) => rational_to_f64(r),
            ExtValue::Real(x) => x,
            ExtValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtValue::Infinite) || self.to_f64().is_infinite()
    }

    pub fn is_zero(self) -> bool {
        match self {
            ExtValue::Rational(r) => r.is_zero(),
            ExtValue::Real(x) => x == 0.0,
            ExtValue::Infinite => false,
        }
    }

    /// Product with the convention `0 * inf = 0` (densities of empty sets).
    pub fn times(self, other: ExtValue) -> ExtValue {
        if self.is_zero() || other.is_zero() {
            return ExtValue::ZERO;
        }
        match (self, other) {
            (ExtValue::Infinite, _) | (_, ExtValue::Infinite) => ExtValue::Infinite,
            (ExtValue::Rational(a), ExtValue::Rational(b)) => {
                match (a.numer().checked_mul(*b.numer()), a.denom().checked_mul(*b.denom())) {
                    (Some(n), Some(d)) => ExtValue::Rational(Rational::new(n, d)),
                    _ => ExtValue::Real(rational_to_f64(a) * rational_to_f64(b)),
                }
            }
            (a, b) => ExtValue::Real(a.to_f64() * b.to_f64()),
        }
    }

    pub fn min(self, other: ExtValue) -> ExtValue {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: ExtValue) -> ExtValue {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl From<Rational> for ExtValue {
    fn from(r: Rational) -> Self {
        ExtValue::Rational(r)
    }
}

impl PartialEq for ExtValue {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for ExtValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtValue::Rational(a), ExtValue::Rational(b)) => Some(a.cmp(b)),
            (ExtValue::Infinite, ExtValue::Infinite) => Some(Ordering::Equal),
            (a, b) => a.to_f64().partial_cmp(&b.to_f64()),
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Rational(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            ExtValue::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            ExtValue::Real(x) if x.is_infinite() => write!(f, "inf"),
            ExtValue::Real(x) => write!(f, "{x}"),
            ExtValue::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for ExtValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "inf" || t == "+inf" {
            return Ok(ExtValue::Infinite);
        }
        if t.contains('/') || !t.contains(['.', 'e', 'E']) {
            return parse_rational(t).map(ExtValue::Rational);
        }
        t.parse::<f64>()
            .map(ExtValue::Real)
            .map_err(|_| format!("cannot parse {s:?} as an extended real"))
    }
}

impl Serialize for ExtValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helper storing a [`Rational`] as `"n/d"`.
pub mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ExtValue::Rational(*r).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(u64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) => parse_rational(&s).map_err(serde::de::Error::custom),
            Raw::Int(n) => Ok(Rational::from_integer(n)),
            Raw::Float(x) => parse_rational(&x.to_string()).map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_and_decimals() {
        assert_eq!(parse_rational("3/2").unwrap(), Rational::new(3, 2));
        assert_eq!(parse_rational("1.5").unwrap(), Rational::new(3, 2));
        assert_eq!(parse_rational("7").unwrap(), Rational::from_integer(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn ext_value_round_trips_through_strings() {
        for v in [ExtValue::ratio(2, 3), ExtValue::Infinite, ExtValue::Real(0.25), ExtValue::ZERO] {
            let s = v.to_string();
            let back: ExtValue = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }

    #[test]
    fn zero_times_infinity_is_zero() {
        assert!(ExtValue::ZERO.times(ExtValue::Infinite).is_zero());
        assert!(ExtValue::ratio(1, 2).times(ExtValue::Infinite).is_infinite());
        assert_eq!(ExtValue::ratio(1, 3).times(ExtValue::ratio(2, 1)), ExtValue::ratio(2, 3));
    }

    #[test]
    fn ordering_mixes_kinds() {
        assert!(ExtValue::ratio(1, 2) < ExtValue::Real(0.6));
        assert!(ExtValue::Real(1e300) < ExtValue::Infinite);
        assert_eq!(cmp_fractions(1, 3, 2, 6), Ordering::Equal);
    }
}
