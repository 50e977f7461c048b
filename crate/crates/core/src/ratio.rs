//! Exact rational helpers: `"p/q"` text form and float rendering.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Renders a rational as `"p/q"` in lowest terms (denominator always shown).
pub fn to_text(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `"p/q"` or a bare integer.
pub fn from_text(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s.trim(), "1"),
    };
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

pub fn int(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

pub fn frac(p: impl Into<BigInt>, q: impl Into<BigInt>) -> BigRational {
    BigRational::new(p.into(), q.into())
}

pub fn from_biguint(n: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n.clone()))
}

/// Float rendering accurate to a few ulps even when numerator and
/// denominator are far outside the `f64` range.
pub fn to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let neg = q.is_negative();
    let n = q.numer().abs();
    let d = q.denom().clone();
    let shift = n.bits() as i64 - d.bits() as i64;
    // scale so the quotient has about 64 significant bits
    let k = 64 - shift;
    let quotient = if k >= 0 {
        (n << (k as usize)) / d
    } else {
        n / (d << ((-k) as usize))
    };
    let mant = quotient.to_f64().unwrap_or(f64::NAN);
    let v = mant * 2f64.powi((-k).clamp(-1100, 1100) as i32);
    if neg {
        -v
    } else {
        v
    }
}

/// `1 / n` as a rational.
pub fn recip(n: impl Into<BigInt>) -> BigRational {
    BigRational::new(BigInt::one(), n.into())
}

pub mod serde_text {
    //! `#[serde(with = ...)]` adapter storing a rational as `"p/q"`.
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_text(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        from_text(&s).map_err(serde::de::Error::custom)
    }
}
