//! Digit blocks, chunk parsing, simple discrepancy and block equivalence.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::residue;

const DIGIT_CHARS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Finite digit sequence over `0..base`, most significant digit first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DigitBlock {
    base: u32,
    digits: Vec<u32>,
}

impl DigitBlock {
    pub fn new(base: u32, digits: Vec<u32>) -> Result<Self> {
        if base < 2 {
            return invalid(format!("base {base} is below 2"));
        }
        if let Some(d) = digits.iter().find(|&&d| d >= base) {
            return invalid(format!("digit {d} out of range for base {base}"));
        }
        Ok(Self { base, digits })
    }

    pub(crate) fn new_unchecked(base: u32, digits: Vec<u32>) -> Self {
        debug_assert!(digits.iter().all(|&d| d < base));
        Self { base, digits }
    }

    pub fn zeros(base: u32, len: usize) -> Result<Self> {
        Self::new(base, vec![0; len])
    }

    /// Parses the textual form produced by [`DigitBlock::to_digit_string`].
    pub fn parse(base: u32, text: &str) -> Result<Self> {
        if base <= 36 {
            let digits = text
                .chars()
                .map(|c| {
                    c.to_digit(36)
                        .ok_or_else(|| Error::Parse(format!("bad digit {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Self::new(base, digits)
        } else if text.is_empty() {
            Self::new(base, Vec::new())
        } else {
            let digits = text
                .split('.')
                .map(|t| t.parse::<u32>().map_err(|_| Error::Parse(format!("bad digit {t:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Self::new(base, digits)
        }
    }

    /// Bases up to 36 use `0-9a-z`; larger bases use dot-separated decimals.
    pub fn to_digit_string(&self) -> String {
        if self.base <= 36 {
            self.digits.iter().map(|&d| DIGIT_CHARS[d as usize] as char).collect()
        } else {
            self.digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(".")
        }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn into_digits(self) -> Vec<u32> {
        self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Integer value `b_0 s^(ℓ-1) + … + b_(ℓ-1)`.
    pub fn value(&self) -> BigUint {
        crate::radix::digits_to_biguint(&self.digits, self.base)
    }

    pub fn is_even(&self) -> bool {
        if self.base.is_multiple_of(2) {
            self.digits.last().is_none_or(|d| d % 2 == 0)
        } else {
            // odd base: parity equals digit-sum parity
            self.digits.iter().map(|&d| d as u64).sum::<u64>() % 2 == 0
        }
    }

    pub fn concat(&self, other: &DigitBlock) -> Result<DigitBlock> {
        if self.base != other.base {
            return invalid("cannot concatenate blocks over different bases");
        }
        let mut digits = self.digits.clone();
        digits.extend_from_slice(&other.digits);
        Ok(Self::new_unchecked(self.base, digits))
    }

    /// The chunks `(w;m)` as borrowed slices.
    pub fn chunks(&self, m: usize) -> impl Iterator<Item = &[u32]> {
        self.digits.chunks_exact(m.max(1))
    }

    /// Occurrences of `d` in `(w;m)` with `m = |d|`.
    pub fn chunk_occurrences(&self, d: &DigitBlock) -> usize {
        if d.is_empty() {
            return 0;
        }
        self.chunks(d.len()).filter(|c| *c == d.digits()).count()
    }
}

impl fmt::Display for DigitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_digit_string())
    }
}

/// `(w;m)`: consecutive length-`m` chunks covering the longest prefix of
/// length divisible by `m`.
pub fn parse_blocks(w: &DigitBlock, m: usize) -> Result<Vec<DigitBlock>> {
    if m == 0 {
        return invalid("chunk length must be at least 1");
    }
    Ok(w.chunks(m).map(|c| DigitBlock::new_unchecked(w.base, c.to_vec())).collect())
}

/// Simple discrepancy of a tally: `len` items, `counts` for the symbols seen,
/// over an alphabet of `alphabet` symbols.
pub fn discrepancy_from_counts<I>(counts: I, len: u64, alphabet: &BigUint) -> Result<BigRational>
where
    I: IntoIterator<Item = u64>,
{
    if len == 0 {
        return invalid("discrepancy of an empty sequence");
    }
    if alphabet.is_zero() {
        return invalid("empty alphabet");
    }
    // D = max |c·V − len| / (len·V)
    let v = BigInt::from(alphabet.clone());
    let len_i = BigInt::from(len);
    let mut seen = BigUint::zero();
    let mut worst = BigInt::zero();
    for c in counts {
        if c == 0 {
            continue;
        }
        seen += 1u32;
        let dev = (BigInt::from(c) * &v - &len_i).magnitude().clone();
        let dev = BigInt::from(dev);
        if dev > worst {
            worst = dev;
        }
    }
    if &seen < alphabet && len_i > worst {
        // an unseen symbol deviates by exactly 1/V
        worst = len_i.clone();
    }
    Ok(BigRational::new(worst, len_i * v))
}

/// Simple discrepancy of a sequence of hashable symbols over an alphabet of
/// `alphabet` symbols.
pub fn discrepancy<T: std::hash::Hash + Eq>(items: &[T], alphabet: &BigUint) -> Result<BigRational> {
    let mut counts: HashMap<&T, u64> = HashMap::new();
    for it in items {
        *counts.entry(it).or_insert(0) += 1;
    }
    discrepancy_from_counts(counts.into_values(), items.len() as u64, alphabet)
}

/// Discrepancy of the single digits of `w` over `B_base`.
pub fn digit_discrepancy(w: &DigitBlock) -> Result<BigRational> {
    let mut counts = vec![0u64; w.base as usize];
    for &d in w.digits() {
        counts[d as usize] += 1;
    }
    discrepancy_from_counts(counts, w.len() as u64, &BigUint::from(w.base))
}

/// Discrepancy of `(w;m)` over `B_s^m`.
pub fn chunk_discrepancy(w: &DigitBlock, m: usize) -> Result<BigRational> {
    if m == 0 {
        return invalid("chunk length must be at least 1");
    }
    if m == 1 {
        return digit_discrepancy(w);
    }
    let chunks: Vec<&[u32]> = w.chunks(m).collect();
    discrepancy(&chunks, &BigUint::from(w.base).pow(m as u32))
}

/// True when every length-`m` chunk value occurs equally often in `(w;m)`.
pub fn is_balanced(w: &DigitBlock, m: usize) -> Result<bool> {
    if m == 0 || !w.len().is_multiple_of(m) {
        return invalid(format!("chunk length {m} does not divide block length {}", w.len()));
    }
    if w.is_empty() {
        return Ok(true);
    }
    Ok(chunk_discrepancy(w, m)?.is_zero())
}

/// Same chunk multisets for every `m` in `ms`.
pub fn is_block_equivalent(u: &DigitBlock, v: &DigitBlock, ms: &BTreeSet<u64>) -> Result<bool> {
    if u.len() != v.len() {
        return invalid(format!("block lengths differ: {} vs {}", u.len(), v.len()));
    }
    if u.base != v.base {
        return invalid("blocks over different bases");
    }
    if ms.contains(&0) {
        return invalid("chunk lengths must be positive");
    }
    let l = ms.iter().fold(1u64, |acc, &m| acc.lcm(&m));
    if !(u.len() as u64).is_multiple_of(l) {
        return invalid(format!("block length {} is not a multiple of {l}", u.len()));
    }
    for &m in ms {
        let mut a: Vec<&[u32]> = u.chunks(m as usize).collect();
        let mut b: Vec<&[u32]> = v.chunks(m as usize).collect();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Ok(false);
        }
    }
    Ok(true)
}

fn encode_positions(xs: &BTreeSet<u64>, ell: usize, base: u32) -> DigitBlock {
    let mut digits = vec![0u32; ell * xs.len()];
    for (i, &x) in xs.iter().enumerate() {
        digits[i * ell + x as usize] = 1;
    }
    DigitBlock::new_unchecked(base, digits)
}

/// Blocks `(u, v)` that are block equivalent for the fair extension of `ms`
/// but not for `n`. Each element `x` of the separating residue sets becomes
/// a block of zeros with a single 1 at position `x`.
pub fn inequivalent_block_pair(s: u32, ms: &BTreeSet<u64>, n: u64) -> Result<(DigitBlock, DigitBlock)> {
    if s < 2 {
        return invalid(format!("base {s} is below 2"));
    }
    if n == 0 || ms.contains(&0) {
        return invalid("moduli must be positive");
    }
    if let Some(m) = ms.iter().find(|&&m| m % n == 0) {
        return invalid(format!("{n} divides {m}"));
    }
    if ms.is_empty() {
        // nothing to keep equivalent: one differing leading digit, padded to length n
        let u = vec![0u32; n as usize];
        let mut v = u.clone();
        v[0] = 1;
        return Ok((DigitBlock::new_unchecked(s, u), DigitBlock::new_unchecked(s, v)));
    }
    let w = residue::residue_witness(ms, n)?;
    let top = w.x.iter().chain(w.y.iter()).copied().max().unwrap_or(0);
    let ell = (top / w.modulus + 1) * w.modulus;
    Ok((
        encode_positions(&w.x, ell as usize, s),
        encode_positions(&w.y, ell as usize, s),
    ))
}

/// Largest block count accepted by [`count_low_discrepancy`].
pub const ENUMERATION_LIMIT: u64 = 1 << 24;

/// Number of blocks in `B_v^len` with digit discrepancy below `eps`, by
/// exhaustive enumeration.
pub fn count_low_discrepancy(v: u32, len: usize, eps: &BigRational) -> Result<u64> {
    if v < 2 || len == 0 {
        return invalid("need an alphabet of at least 2 symbols and a positive length");
    }
    let total = (v as u64).checked_pow(len as u32).filter(|&t| t <= ENUMERATION_LIMIT);
    let Some(total) = total else {
        return Err(Error::TooLarge(format!("{v}^{len} blocks exceed the enumeration limit 2^24")));
    };
    let alphabet = BigUint::from(v);
    let mut digits = vec![0u32; len];
    let mut counts = vec![0u64; v as usize];
    counts[0] = len as u64;
    let mut hits = 0;
    for i in 0..total {
        if i > 0 {
            // odometer increment from the last position
            let mut pos = len - 1;
            loop {
                counts[digits[pos] as usize] -= 1;
                digits[pos] += 1;
                if digits[pos] == v {
                    digits[pos] = 0;
                    counts[0] += 1;
                    pos -= 1;
                } else {
                    counts[digits[pos] as usize] += 1;
                    break;
                }
            }
        }
        if &discrepancy_from_counts(counts.iter().copied(), len as u64, &alphabet)? < eps {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Monte Carlo estimate of the fraction of `B_v^len` with digit discrepancy
/// below `eps`.
pub fn estimate_low_discrepancy_fraction<R: Rng>(
    v: u32,
    len: usize,
    eps: &BigRational,
    samples: u64,
    rng: &mut R,
) -> Result<f64> {
    if v < 2 || len == 0 || samples == 0 {
        return invalid("need v >= 2, len >= 1 and at least one sample");
    }
    let alphabet = BigUint::from(v);
    let mut hits = 0u64;
    let mut counts = vec![0u64; v as usize];
    for _ in 0..samples {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..len {
            counts[rng.gen_range(0..v) as usize] += 1;
        }
        if &discrepancy_from_counts(counts.iter().copied(), len as u64, &alphabet)? < eps {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// Upper end of the discrepancy range, `1 − 1/#V`.
pub fn max_discrepancy(alphabet: &BigUint) -> BigRational {
    let v = BigInt::from(alphabet.clone());
    BigRational::one() - BigRational::new(BigInt::one(), v)
}
