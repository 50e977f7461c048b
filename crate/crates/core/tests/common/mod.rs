//! Helpers shared by the integration tests: profiles, an exponential oracle
//! independent of the library's logarithm code, and generators of
//! premise-satisfying lemma instances.
#![allow(dead_code)]

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use simplenormal::block::DigitBlock;
use simplenormal::certified::nat_pos;
use simplenormal::profile::{validate_profile, NormalityProfile};
use simplenormal::radix::{digits_to_biguint, SAdicNumber};

pub fn toy_profile(until_b: u64, seed: u64) -> NormalityProfile {
    validate_profile(&format!(
        r#"{{"entries":[{{"s":2,"M":[1]}}],"n_max":2,"c":1,"seed":{seed},"until_b":{until_b}}}"#
    ))
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `m · 2^exp`.
#[derive(Clone, Debug)]
struct Float {
    m: BigUint,
    exp: i64,
}

impl Float {
    /// Keeps `bits` leading bits of the mantissa, rounding down or up.
    fn trim(self, bits: u64, up: bool) -> Float {
        let have = self.m.bits();
        if have <= bits {
            return self;
        }
        let drop = have - bits;
        let mut m = &self.m >> drop;
        if up && (&m << drop) != self.m {
            m += 1u32;
        }
        Float { m, exp: self.exp + drop as i64 }
    }

    fn mul(&self, o: &Float, bits: u64, up: bool) -> Float {
        Float { m: &self.m * &o.m, exp: self.exp + o.exp }.trim(bits, up)
    }

    fn cmp_int(&self, x: &BigUint) -> Ordering {
        if self.exp >= 0 {
            (&self.m << self.exp as u64).cmp(x)
        } else {
            self.m.cmp(&(x << (-self.exp) as u64))
        }
    }
}

/// Bounds on `e` from the factorial series at `w` fractional bits.
fn e_bounds(w: u64) -> (Float, Float) {
    let one = BigUint::one() << w;
    let mut term = one.clone();
    let mut sum = BigUint::zero();
    let mut k = 0u32;
    while !term.is_zero() {
        sum += &term;
        k += 1;
        term /= k;
    }
    // each truncated division loses < 1 ulp; the dropped tail is < 2 ulps
    let lo = &sum - BigUint::from(k + 1).min(sum.clone());
    let hi = &sum + BigUint::from(k + 3);
    (Float { m: lo, exp: -(w as i64) }, Float { m: hi, exp: -(w as i64) })
}

fn pow(base: &Float, mut e: u64, bits: u64, up: bool) -> Float {
    let mut acc = Float { m: BigUint::one(), exp: 0 };
    let mut sq = base.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc.mul(&sq, bits, up);
        }
        e >>= 1;
        if e > 0 {
            sq = sq.mul(&sq, bits, up);
        }
    }
    acc
}

/// Certified bounds `lo <= e^b <= hi`, refined on demand.
pub struct ExpBounds {
    b: u64,
    bits: u64,
    lo: Float,
    hi: Float,
}

impl ExpBounds {
    pub fn new(b: u64) -> Self {
        Self::at(b, 128 + 64 - b.leading_zeros() as u64)
    }

    fn at(b: u64, bits: u64) -> Self {
        let (lo, hi) = e_bounds(bits + 16);
        ExpBounds { b, bits, lo: pow(&lo, b, bits, false), hi: pow(&hi, b, bits, true) }
    }

    /// Compares the integer `x` with `e^b`.
    pub fn cmp(&mut self, x: &BigUint) -> Ordering {
        loop {
            if self.hi.cmp_int(x) == Ordering::Less {
                return Ordering::Greater;
            }
            if self.lo.cmp_int(x) == Ordering::Greater {
                return Ordering::Less;
            }
            assert!(self.bits < 1 << 16, "e^{} comparison undecided", self.b);
            *self = Self::at(self.b, self.bits * 2);
        }
    }
}

/// Digits whose counts are as even as possible, shuffled.
pub fn balanced_digits(r: &mut ChaCha8Rng, base: u32, len: usize) -> Vec<u32> {
    let mut v: Vec<u32> = (0..len).map(|i| (i % base as usize) as u32).collect();
    v.shuffle(r);
    v
}

pub fn random_digits(r: &mut ChaCha8Rng, base: u32, len: usize) -> Vec<u32> {
    (0..len).map(|_| r.gen_range(0..base)).collect()
}

/// A point `q` of precision `⟨b; s⟩` and a rational `x` in its interval,
/// with low digits often set to `s − 1` and `x` often close to the top of
/// the interval so carries propagate.
pub fn transfer_instance(r: &mut ChaCha8Rng, s: u32, b: u64) -> (SAdicNumber, BigRational) {
    let prec = nat_pos(b, s as u64).unwrap();
    let mut digits = random_digits(r, s, prec as usize);
    if r.gen_bool(0.5) {
        let run = r.gen_range(0..=prec.min(12)) as usize;
        let n = digits.len();
        digits[n - run..].iter_mut().for_each(|d| *d = s - 1);
    }
    let q = SAdicNumber::new(BigUint::from(s), prec, digits_to_biguint(&digits, s)).unwrap();
    let ulp = BigRational::new(1.into(), q.denominator().into());
    let frac = if r.gen_bool(0.5) {
        let k: u32 = r.gen_range(1..40);
        BigRational::one() - BigRational::new(1.into(), (BigUint::one() << k).into())
    } else {
        BigRational::new(r.gen_range(0..1000u32).into(), 1000.into())
    };
    (q.clone(), q.value() + ulp * frac)
}

pub fn block(base: u32, digits: Vec<u32>) -> DigitBlock {
    DigitBlock::new(base, digits).unwrap()
}
