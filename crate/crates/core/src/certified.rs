//! Certified enclosures of logarithms and π, and ceilings of expressions
//! built from them.
//!
//! Values are computed in binary fixed point with an explicit error budget per
//! series term, so every returned interval provably contains the true value.
//! Ceilings refine the working precision until both interval ends agree;
//! every quantity ceiled here is irrational, so refinement terminates.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{internal, invalid, Result};

/// Closed interval `[lo, hi]` of rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Interval {
    pub fn point(v: BigRational) -> Self {
        Self { lo: v.clone(), hi: v }
    }

    pub fn contains(&self, v: &BigRational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    /// Product with a non-negative rational.
    pub fn scale(&self, k: &BigRational) -> Interval {
        assert!(!k.is_negative(), "scale factor must be non-negative");
        Interval { lo: &self.lo * k, hi: &self.hi * k }
    }

    /// Product of two intervals with non-negative ends.
    pub fn mul_nonneg(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo * &o.lo, hi: &self.hi * &o.hi }
    }

    /// `k / self` for a positive interval and non-negative `k`.
    pub fn div_into(&self, k: &BigRational) -> Interval {
        assert!(self.lo.is_positive(), "divisor interval must be positive");
        Interval { lo: k / &self.hi, hi: k / &self.lo }
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }
}

/// `[lo, hi] · 2^(-scale)`.
#[derive(Clone, Debug)]
struct Fixed {
    lo: BigInt,
    hi: BigInt,
    scale: u32,
}

impl Fixed {
    fn to_interval(&self) -> Interval {
        let den = BigInt::one() << self.scale;
        Interval {
            lo: BigRational::new(self.lo.clone(), den.clone()),
            hi: BigRational::new(self.hi.clone(), den),
        }
    }
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

/// `atanh(p/q)` for `0 <= p/q <= 1/3` at `prec` fractional bits.
fn atanh_fixed(p: &BigInt, q: &BigInt, prec: u32) -> Fixed {
    let z = floor_div(&(p << prec), q);
    let z2 = (&z * &z) >> prec;
    let mut pw = z.clone();
    let mut sum = BigInt::zero();
    let mut terms: u64 = 0;
    let mut i: u64 = 0;
    while !pw.is_zero() {
        sum += &pw / BigInt::from(2 * i + 1);
        pw = (&pw * &z2) >> prec;
        i += 1;
        terms += 1;
    }
    // per term: ≤ 2 ulps in the power, 1 ulp in the division; tail < 3 ulps;
    // input rounding contributes ≤ 9/8 ulp through the derivative bound
    let err = BigInt::from(3 * terms + 8);
    Fixed { lo: &sum - &err, hi: &sum + &err, scale: prec }
}

/// `atan(1/n)` for integer `n >= 2` at `prec` fractional bits.
fn atan_inv_fixed(n: u64, prec: u32) -> Fixed {
    let n2 = BigInt::from(n) * BigInt::from(n);
    let mut pw = (BigInt::one() << prec) / BigInt::from(n);
    let mut sum = BigInt::zero();
    let mut terms: u64 = 0;
    let mut i: u64 = 0;
    while !pw.is_zero() {
        let term = &pw / BigInt::from(2 * i + 1);
        if i.is_multiple_of(2) {
            sum += term;
        } else {
            sum -= term;
        }
        pw = &pw / &n2;
        i += 1;
        terms += 1;
    }
    let err = BigInt::from(2 * terms + 4);
    Fixed { lo: &sum - &err, hi: &sum + &err, scale: prec }
}

fn ln2_fixed(prec: u32) -> Fixed {
    let a = atanh_fixed(&BigInt::one(), &BigInt::from(3), prec);
    Fixed { lo: a.lo * 2, hi: a.hi * 2, scale: prec }
}

/// Enclosure of `ln x` for `x >= 1`, with width about `2^-prec`.
fn ln_fixed(x: &BigUint, prec: u32) -> Fixed {
    let k = x.bits() - 1;
    let work = prec + 16 + (64 - k.leading_zeros());
    let two_k = BigInt::one() << k;
    let ln2 = ln2_fixed(work);
    let kk = BigInt::from(k);
    let xi = BigInt::from(x.clone());
    if xi == two_k {
        return Fixed { lo: &ln2.lo * &kk, hi: &ln2.hi * &kk, scale: work };
    }
    let a = atanh_fixed(&(&xi - &two_k), &(&xi + &two_k), work);
    Fixed {
        lo: &ln2.lo * &kk + a.lo * 2,
        hi: &ln2.hi * &kk + a.hi * 2,
        scale: work,
    }
}

fn ln_cache() -> &'static Mutex<HashMap<(u64, u32), Fixed>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u32), Fixed>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn ln_u64_fixed(r: u64, prec: u32) -> Fixed {
    if let Some(f) = ln_cache().lock().expect("ln cache poisoned").get(&(r, prec)) {
        return f.clone();
    }
    let f = ln_fixed(&BigUint::from(r), prec);
    ln_cache().lock().expect("ln cache poisoned").insert((r, prec), f.clone());
    f
}

/// Enclosure of `ln x` for a positive integer `x`.
pub fn ln(x: &BigUint, prec: u32) -> Result<Interval> {
    if x.is_zero() {
        return invalid("logarithm of zero");
    }
    Ok(ln_fixed(x, prec).to_interval())
}

/// Enclosure of `exp · ln root`, i.e. the logarithm of `root^exp`.
pub fn ln_power(root: u64, exp: u64, prec: u32) -> Result<Interval> {
    if root == 0 {
        return invalid("logarithm of zero");
    }
    let work = prec + (64 - exp.leading_zeros());
    let f = ln_u64_fixed(root, work);
    Ok(f.to_interval().scale(&BigRational::from_integer(BigInt::from(exp))))
}

/// Enclosure of π via Machin's formula.
pub fn pi(prec: u32) -> Interval {
    let work = prec + 16;
    let a = atan_inv_fixed(5, work);
    let b = atan_inv_fixed(239, work);
    Fixed {
        lo: a.lo * 16 - b.hi * 4,
        hi: a.hi * 16 - b.lo * 4,
        scale: work,
    }
    .to_interval()
}

fn ceil_rat(q: &BigRational) -> BigInt {
    q.ceil().to_integer()
}

/// Precision at which refinement starts.
pub const START_PRECISION: u32 = 64;
/// Precision beyond which a ceiling is declared undecidable.
pub const MAX_PRECISION: u32 = 1 << 16;

/// `⌈v⌉` for a value known only through enclosures `f(prec)` that shrink as
/// `prec` grows. The value must not be an integer.
pub fn certified_ceil<F>(mut f: F) -> Result<BigInt>
where
    F: FnMut(u32) -> Result<Interval>,
{
    let mut prec = START_PRECISION;
    loop {
        let iv = f(prec)?;
        let lo = ceil_rat(&iv.lo);
        let hi = ceil_rat(&iv.hi);
        // lo == hi alone would also accept an integer lower end; require the
        // enclosure to avoid the integer itself
        if lo == hi && BigRational::from_integer(lo.clone()) != iv.lo {
            return Ok(lo);
        }
        if prec >= MAX_PRECISION {
            return internal(format!(
                "ceiling undecided at {prec} bits: enclosure [{}, {}]",
                crate::ratio::to_f64(&iv.lo),
                crate::ratio::to_f64(&iv.hi)
            ));
        }
        prec *= 2;
    }
}

/// `⌈b / ln(root^exp)⌉`, the base-`root^exp` digit position matching `b`
/// nats. Zero at `b = 0`.
pub fn nat_pos_power(b: u64, root: u64, exp: u64) -> Result<u64> {
    if root < 2 || exp == 0 {
        return invalid(format!("radix {root}^{exp} is below 2"));
    }
    if b == 0 {
        return Ok(0);
    }
    let bb = BigInt::from(b);
    let ee = BigInt::from(exp);
    let mut prec = START_PRECISION + 64;
    loop {
        let f = ln_u64_fixed(root, prec);
        // b / (e·ln r) ∈ [b·2^P / (e·hi), b·2^P / (e·lo)]
        let num = &bb << f.scale;
        let lo = num.div_ceil(&(&ee * &f.hi));
        let hi = num.div_ceil(&(&ee * &f.lo));
        if lo == hi {
            return u64::try_from(lo).or_else(|_| internal("position exceeds u64"));
        }
        if prec >= MAX_PRECISION {
            return internal(format!("nat position of {b} in base {root}^{exp} undecided"));
        }
        prec *= 2;
    }
}

/// `⟨b; r⟩ = ⌈b / ln r⌉`.
pub fn nat_pos(b: u64, r: u64) -> Result<u64> {
    nat_pos_power(b, r, 1)
}

/// `⌈ln x + 3 ln y⌉` where `x = xr^xe` and `y = yr^ye`.
pub fn ceil_log_sum(xr: u64, xe: u64, yr: u64, ye: u64) -> Result<u64> {
    let three = BigRational::from_integer(BigInt::from(3));
    let v = certified_ceil(|p| Ok(ln_power(xr, xe, p)?.add(&ln_power(yr, ye, p)?.scale(&three))))?;
    u64::try_from(v).or_else(|_| internal("ceiling exceeds u64"))
}

/// Rational lower bound of `ln(x − 2) / ln x` for an integer `x >= 4`.
pub fn eta_lower_bound(x: &BigUint, prec: u32) -> Result<BigRational> {
    if x < &BigUint::from(4u8) {
        return invalid("eta needs x >= 4");
    }
    let num = ln(&(x - 2u32), prec)?;
    let den = ln(x, prec)?;
    Ok(&num.lo / &den.hi)
}
