//! Serde support for exact rationals.
//!
//! Integers serialize as JSON integers and dyadic fractions with a small
//! denominator (midranks are always half-integers) as JSON floats, which
//! are exact in binary floating point. Anything else falls back to a
//! `"p/q"` string so no value is ever rounded on the way out.

use num_rational::Ratio;
use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;
use std::fmt;

pub type Rational = Ratio<i64>;

const MAX_DYADIC_SHIFT: u32 = 20;

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn is_small_dyadic(d: i64) -> bool {
    d > 0 && (d as u64).is_power_of_two() && d <= (1 << MAX_DYADIC_SHIFT)
}

/// Exact conversion from a float that is a dyadic rational (e.g. 2.5).
pub fn from_f64_exact(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let mut scale: i64 = 1;
    for _ in 0..=MAX_DYADIC_SHIFT {
        let scaled = x * scale as f64;
        if scaled.fract() == 0.0 && scaled.abs() < 9.0e15 {
            return Some(Rational::new(scaled as i64, scale));
        }
        scale *= 2;
    }
    None
}

pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Ok(i) = s.parse::<i64>() {
        return Some(Rational::from_integer(i));
    }
    from_f64_exact(s.parse::<f64>().ok()?)
}

pub fn display(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else if is_small_dyadic(*r.denom()) {
        format!("{}", to_f64(r))
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    if r.is_integer() {
        s.serialize_i64(*r.numer())
    } else if is_small_dyadic(*r.denom()) {
        s.serialize_f64(to_f64(r))
    } else {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    struct RationalVisitor;

    impl Visitor<'_> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an integer, an exact dyadic float, or a \"p/q\" string")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            i64::try_from(v)
                .map(Rational::from_integer)
                .map_err(|_| E::custom("integer out of range"))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            from_f64_exact(v).ok_or_else(|| E::custom(format!("{v} is not an exact rational")))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse(v).ok_or_else(|| E::custom(format!("cannot parse rational from {v:?}")))
        }
    }

    d.deserialize_any(RationalVisitor)
}
