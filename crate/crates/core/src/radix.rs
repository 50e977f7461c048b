//! Exact adic rationals, digit extraction in arbitrary bases and adic
//! subinterval selection.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::block::DigitBlock;
use crate::certified;
use crate::error::{internal, invalid, Error, Result};

/// An integer radix written as `root^exp`, so logarithms of huge radices stay
/// cheap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Radix {
    pub root: u64,
    pub exp: u64,
}

impl Radix {
    pub fn new(root: u64, exp: u64) -> Result<Self> {
        if root < 2 || exp == 0 {
            return invalid(format!("radix {root}^{exp} is below 2"));
        }
        Ok(Self { root, exp })
    }

    pub fn simple(r: u64) -> Result<Self> {
        Self::new(r, 1)
    }

    pub fn value(&self) -> BigUint {
        BigUint::from(self.root).pow(self.exp as u32)
    }

    /// `⟨b; r⟩`.
    pub fn nat_pos(&self, b: u64) -> Result<u64> {
        certified::nat_pos_power(b, self.root, self.exp)
    }
}

impl fmt::Display for Radix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 1 {
            write!(f, "{}", self.root)
        } else {
            write!(f, "{}^{}", self.root, self.exp)
        }
    }
}

/// Integer value of a most-significant-first digit vector.
pub fn digits_to_biguint(digits: &[u32], base: u32) -> BigUint {
    if digits.is_empty() {
        return BigUint::zero();
    }
    if base <= 256 {
        let bytes: Vec<u8> = digits.iter().map(|&d| d as u8).collect();
        return BigUint::from_radix_be(&bytes, base).expect("digits checked against base");
    }
    // group digits so each group fits a u64 limb-sized multiplier
    let mut group = 1usize;
    while (base as u128).pow(group as u32 + 1) <= u64::MAX as u128 {
        group += 1;
    }
    let mut acc = BigUint::zero();
    for chunk in digits.chunks(group) {
        let mut v: u64 = 0;
        for &d in chunk {
            v = v * base as u64 + d as u64;
        }
        acc = acc * BigUint::from(base).pow(chunk.len() as u32) + v;
    }
    acc
}

/// The last `len` base-`base` digits of `x`, most significant first, padded
/// with leading zeros.
pub fn biguint_to_digits(x: &BigUint, base: u32, len: usize) -> Vec<u32> {
    let mut out = vec![0u32; len];
    if x.is_zero() || len == 0 {
        return out;
    }
    if base <= 256 {
        let le = x.to_radix_le(base);
        for (i, &d) in le.iter().take(len).enumerate() {
            out[len - 1 - i] = d as u32;
        }
        return out;
    }
    let mut rest = x.clone();
    let b = BigUint::from(base);
    for slot in out.iter_mut().rev() {
        if rest.is_zero() {
            break;
        }
        let (q, r) = rest.div_rem(&b);
        *slot = r.to_u32().expect("remainder below base");
        rest = q;
    }
    out
}

/// `numerator · base^(-prec)`, a rational in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SAdicNumber {
    base: BigUint,
    prec: u64,
    numerator: BigUint,
}

impl SAdicNumber {
    pub fn new(base: BigUint, prec: u64, numerator: BigUint) -> Result<Self> {
        if base < BigUint::from(2u8) {
            return invalid(format!("base {base} is below 2"));
        }
        if numerator >= base.pow(prec as u32) {
            return invalid("numerator must be below base^prec");
        }
        Ok(Self { base, prec, numerator })
    }

    pub fn zero(base: BigUint) -> Result<Self> {
        Self::new(base, 0, BigUint::zero())
    }

    pub fn base(&self) -> &BigUint {
        &self.base
    }

    pub fn prec(&self) -> u64 {
        self.prec
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn denominator(&self) -> BigUint {
        self.base.pow(self.prec as u32)
    }

    pub fn value(&self) -> BigRational {
        BigRational::new(BigInt::from(self.numerator.clone()), BigInt::from(self.denominator()))
    }

    /// Appends `extra` base digits whose integer value is `tail`.
    pub fn extend(&self, extra: u64, tail: &BigUint) -> Result<SAdicNumber> {
        let shift = self.base.pow(extra as u32);
        if tail >= &shift {
            return invalid("tail does not fit in the appended digits");
        }
        Ok(SAdicNumber {
            base: self.base.clone(),
            prec: self.prec + extra,
            numerator: &self.numerator * shift + tail,
        })
    }

    /// The interval of numbers sharing these digits.
    pub fn interval(&self) -> AdicInterval {
        AdicInterval { base: self.base.clone(), prec: self.prec, index: self.numerator.clone() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BaseRepr {
    Small(u64),
    Big(String),
}

fn base_to_repr(b: &BigUint) -> BaseRepr {
    match b.to_u64() {
        Some(v) => BaseRepr::Small(v),
        None => BaseRepr::Big(b.to_string()),
    }
}

fn base_from_repr(r: BaseRepr) -> std::result::Result<BigUint, String> {
    match r {
        BaseRepr::Small(v) => Ok(BigUint::from(v)),
        BaseRepr::Big(s) => s.parse().map_err(|_| format!("bad base {s:?}")),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SAdicRepr {
    base: BaseRepr,
    prec: u64,
    numerator: String,
}

impl Serialize for SAdicNumber {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SAdicRepr {
            base: base_to_repr(&self.base),
            prec: self.prec,
            numerator: self.numerator.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SAdicNumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SAdicRepr::deserialize(d)?;
        let base = base_from_repr(r.base).map_err(D::Error::custom)?;
        let numerator: BigUint = r
            .numerator
            .parse()
            .map_err(|_| D::Error::custom(format!("bad numerator {:?}", r.numerator)))?;
        SAdicNumber::new(base, r.prec, numerator).map_err(D::Error::custom)
    }
}

/// `[index · base^(-prec), (index + 1) · base^(-prec))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdicInterval {
    pub base: BigUint,
    pub prec: u64,
    pub index: BigUint,
}

impl AdicInterval {
    pub fn new(base: BigUint, prec: u64, index: BigUint) -> Result<Self> {
        SAdicNumber::new(base.clone(), prec, index.clone())?;
        Ok(Self { base, prec, index })
    }

    pub fn left(&self) -> BigRational {
        BigRational::new(BigInt::from(self.index.clone()), BigInt::from(self.base.pow(self.prec as u32)))
    }

    pub fn right(&self) -> BigRational {
        BigRational::new(BigInt::from(&self.index + 1u32), BigInt::from(self.base.pow(self.prec as u32)))
    }

    pub fn length(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.base.pow(self.prec as u32)))
    }

    /// Half-open containment `self ⊆ other`.
    pub fn is_within(&self, other: &AdicInterval) -> bool {
        other.left() <= self.left() && self.right() <= other.right()
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.left() <= x && x < &self.right()
    }
}

/// Base-`r` digits at positions `i0+1 ..= i1` of the rational `num/den`
/// (position `j` is the coefficient of `r^(-j)`).
pub fn extract_rational_digits(num: &BigUint, den: &BigUint, r: u32, i0: u64, i1: u64) -> Result<DigitBlock> {
    if r < 2 {
        return invalid(format!("base {r} is below 2"));
    }
    if i1 < i0 {
        return invalid(format!("empty digit window ({i0}, {i1}]"));
    }
    if den.is_zero() {
        return invalid("zero denominator");
    }
    let rb = BigUint::from(r);
    let v = (num * rb.pow(i1 as u32)) / den;
    let window = v % rb.pow((i1 - i0) as u32);
    DigitBlock::new(r, biguint_to_digits(&window, r, (i1 - i0) as usize))
}

/// Base-`r` digits of `x` at positions `i0+1 ..= i1`.
pub fn extract_digits(x: &SAdicNumber, r: u32, i0: u64, i1: u64) -> Result<DigitBlock> {
    extract_rational_digits(&x.numerator, &x.denominator(), r, i0, i1)
}

fn ceil_to_grid(v: &BigRational, scale: &BigUint) -> BigUint {
    let scaled = v * BigRational::from_integer(BigInt::from(scale.clone()));
    scaled.ceil().to_integer().to_biguint().unwrap_or_default()
}

/// An `s`-adic interval inside `[lo, hi)` whose length is at least
/// `(hi − lo) / (2s)`.
pub fn sadic_subinterval(lo: &BigRational, hi: &BigRational, s: u64) -> Result<AdicInterval> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    if s < 2 {
        return invalid(format!("base {s} is below 2"));
    }
    if !(lo >= &zero && lo < hi && hi <= &one) {
        return invalid("need 0 <= lo < hi <= 1");
    }
    let base = BigUint::from(s);
    let len = hi - lo;
    // least m with s^-m < len
    let mut m: u64 = 1;
    let mut grid = base.clone();
    while BigRational::new(BigInt::one(), BigInt::from(grid.clone())) >= len {
        m += 1;
        grid *= s;
    }
    let k = ceil_to_grid(lo, &grid);
    let cand = AdicInterval { base: base.clone(), prec: m, index: k.clone() };
    if &cand.right() <= hi {
        return Ok(cand);
    }
    // the grid point k/s^m lies inside; one of its neighbours one level down fits
    let mid = &k * s;
    if !mid.is_zero() {
        let left = AdicInterval { base: base.clone(), prec: m + 1, index: &mid - 1u32 };
        if &left.left() >= lo {
            return Ok(left);
        }
    }
    let right = AdicInterval { base, prec: m + 1, index: mid };
    if &right.right() <= hi && &right.left() >= lo {
        return Ok(right);
    }
    internal(format!("no {s}-adic subinterval found"))
}

/// Moves from an interval of precision `⟨b; s⟩` to the leftmost `t`-adic
/// interval of precision `⟨a; t⟩` inside it, with `a = b + ⌈ln s + 3 ln t⌉`.
/// Returns `a` and the left end of the chosen interval.
pub fn leftmost_tadic_subinterval(iv: &AdicInterval, s: Radix, b: u64, t: Radix) -> Result<(u64, SAdicNumber)> {
    if iv.base != s.value() {
        return invalid("interval base does not match the stated radix");
    }
    let expected = s.nat_pos(b)?;
    if iv.prec != expected {
        return invalid(format!("interval precision {} differs from <{b};{s}> = {expected}", iv.prec));
    }
    let a = b + certified::ceil_log_sum(s.root, s.exp, t.root, t.exp)?;
    let q = t.nat_pos(a)?;
    let tb = t.value();
    let tq = tb.pow(q as u32);
    let sp = iv.base.pow(iv.prec as u32);
    // k = ⌈index · t^q / s^p⌉
    let k = (&iv.index * &tq).div_ceil(&sp);
    if (&k + 1u32) * &sp > (&iv.index + 1u32) * &tq {
        return internal(format!("no {t}-adic interval of precision {q} fits inside the input"));
    }
    let y = SAdicNumber::new(tb, q, k).map_err(|e| Error::Internal(e.to_string()))?;
    Ok((a, y))
}
