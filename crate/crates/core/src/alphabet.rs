//! The restricted digit alphabet `U` used by one construction phase: every
//! length-`ℓ_U` block over `B_s` except one or two excluded blocks.
//!
//! The excluded blocks are arrangements of a multiset `W` of length-`ℓ`
//! chunks: `2c` copies of every chunk, except `4c` copies of `u` and none of
//! `v`, where `(u, v)` is a block pair equivalent for `M` but not for `n`.
//! Removing such blocks keeps `U` balanced for every `m ∈ M` and biases it
//! against some chunk `d` of length `n`.
//!
//! `ℓ_U = 2cℓs^ℓ` reaches astronomically large values for modest inputs, so
//! an arrangement is stored as an ascending body (implicit) followed by an
//! explicit suffix, and chunk statistics are derived from `u` and `v` alone.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::block::{inequivalent_block_pair, DigitBlock};
use crate::error::{internal, invalid, Error, Result};
use crate::ratio;

/// Largest `ℓ_U` for which blocks are written out digit by digit.
pub const MATERIALIZE_LIMIT: u64 = 1 << 24;
/// Largest bit length of `s^ℓ_U` for which `ε` is computed exactly.
pub const EPS_BIT_LIMIT: u64 = 1 << 22;

/// The chunk multiset `W`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkMultiset {
    base: u32,
    chunk_len: usize,
    copies: u64,
    u: Vec<u32>,
    v: Vec<u32>,
}

impl ChunkMultiset {
    pub fn count(&self, chunk: &[u32]) -> u64 {
        if chunk == self.u.as_slice() {
            2 * self.copies
        } else if chunk == self.v.as_slice() {
            0
        } else {
            self.copies
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk_len
    }

    /// Number of chunks, `2c·s^ℓ`.
    pub fn total(&self) -> BigUint {
        BigUint::from(self.copies) * BigUint::from(self.base).pow(self.chunk_len as u32)
    }

    fn step(&self, chunk: &mut [u32], up: bool) -> bool {
        for pos in (0..chunk.len()).rev() {
            if up {
                if chunk[pos] + 1 < self.base {
                    chunk[pos] += 1;
                    return true;
                }
                chunk[pos] = 0;
            } else {
                if chunk[pos] > 0 {
                    chunk[pos] -= 1;
                    return true;
                }
                chunk[pos] = self.base - 1;
            }
        }
        false
    }

    /// The `k` largest chunks with multiplicity, in ascending order.
    pub fn top(&self, k: u64) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut chunk = vec![self.base - 1; self.chunk_len];
        'outer: loop {
            for _ in 0..self.count(&chunk) {
                if out.len() as u64 == k {
                    break 'outer;
                }
                out.push(chunk.clone());
            }
            if !self.step(&mut chunk, false) {
                break;
            }
        }
        out.reverse();
        out
    }

    /// Calls `f(chunk, multiplicity)` for every chunk in ascending order.
    fn for_each_ascending(&self, mut f: impl FnMut(&[u32], u64)) {
        let mut chunk = vec![0u32; self.chunk_len];
        loop {
            f(&chunk, self.count(&chunk));
            if !self.step(&mut chunk, true) {
                break;
            }
        }
    }
}

/// An arrangement of `W`: the chunks not in `suffix` in ascending order,
/// followed by `suffix`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arrangement {
    suffix: Vec<Vec<u32>>,
}

impl Arrangement {
    pub fn suffix(&self) -> &[Vec<u32>] {
        &self.suffix
    }
}

fn remove_one(items: &[Vec<u32>], target: &[u32]) -> Vec<Vec<u32>> {
    let mut out = items.to_vec();
    if let Some(pos) = out.iter().position(|c| c.as_slice() == target) {
        out.remove(pos);
    }
    out
}

fn distinct(items: &[Vec<u32>]) -> Vec<&Vec<u32>> {
    let mut seen: Vec<&Vec<u32>> = items.iter().collect();
    seen.sort();
    seen.dedup();
    seen
}

fn ends_even(chunk: &[u32]) -> bool {
    chunk.last().is_none_or(|d| d % 2 == 0)
}

/// Least permutation of the ascending multiset `items` whose last chunk has
/// the requested last-digit parity (even bases only).
fn least_ending(items: &[Vec<u32>], want_even: bool) -> Option<Vec<Vec<u32>>> {
    distinct(items)
        .into_iter()
        .filter(|c| ends_even(c) == want_even)
        .map(|f| {
            let mut arr = remove_one(items, f);
            arr.push(f.clone());
            arr
        })
        .min()
}

/// Least permutation of `items` strictly greater than `bound` that ends with
/// the requested parity.
fn least_ending_above(items: &[Vec<u32>], bound: &[Vec<u32>], want_even: bool) -> Option<Vec<Vec<u32>>> {
    for i in (0..bound.len()).rev() {
        let mut rest = items.to_vec();
        for c in &bound[..i] {
            rest = remove_one(&rest, c);
        }
        for c in distinct(&rest) {
            if c <= &bound[i] {
                continue;
            }
            let tail_items = remove_one(&rest, c);
            let tail = if tail_items.is_empty() {
                (ends_even(c) == want_even).then(Vec::new)
            } else {
                least_ending(&tail_items, want_even)
            };
            if let Some(tail) = tail {
                let mut out = bound[..i].to_vec();
                out.push(c.clone());
                out.extend(tail);
                return Some(out);
            }
        }
    }
    None
}

/// The alphabet `U` for one phase.
#[derive(Clone, Debug)]
pub struct AlphabetU {
    s: u32,
    ms: BTreeSet<u64>,
    n: u64,
    c: u64,
    u: DigitBlock,
    v: DigitBlock,
    w: ChunkMultiset,
    ell_u: BigUint,
    z: Arrangement,
    z_tilde: Option<Arrangement>,
    d: DigitBlock,
    c_def: BigRational,
    eps: Option<BigRational>,
}

/// Builds `U` for base `s`, kept balanced for `ms` and biased for `n`.
pub fn balanced_alphabet(s: u32, ms: &BTreeSet<u64>, n: u64, c: u64) -> Result<AlphabetU> {
    if c == 0 {
        return invalid("c must be at least 1");
    }
    let (u, v) = if s == 2 && n == 1 {
        (DigitBlock::parse(2, "01")?, DigitBlock::parse(2, "11")?)
    } else {
        inequivalent_block_pair(s, ms, n)?
    };
    let ell = u.len();
    let w = ChunkMultiset {
        base: s,
        chunk_len: ell,
        copies: 2 * c,
        u: u.digits().to_vec(),
        v: v.digits().to_vec(),
    };
    let ell_u = w.total() * BigUint::from(ell);

    let (z, z_tilde) = if s % 2 == 1 {
        // every multiplicity is even, so the digit sum and hence the value is even
        (Arrangement { suffix: Vec::new() }, None)
    } else {
        search_pair(&w)?
    };

    let mut alphabet = AlphabetU {
        s,
        ms: ms.clone(),
        n,
        c,
        u,
        v,
        w,
        ell_u,
        z,
        z_tilde,
        d: DigitBlock::new(s, vec![0; n as usize])?,
        c_def: BigRational::zero(),
        eps: None,
    };
    alphabet.derive_bias()?;
    Ok(alphabet)
}

fn search_pair(w: &ChunkMultiset) -> Result<(Arrangement, Option<Arrangement>)> {
    let total = w.total();
    let mut k: u64 = 2;
    loop {
        let top = w.top(k);
        if let Some(z) = least_ending(&top, true) {
            if let Some(zt) = least_ending_above(&top, &z, false) {
                return Ok((Arrangement { suffix: z }, Some(Arrangement { suffix: zt })));
            }
        }
        if BigUint::from(k) >= total {
            return internal("no odd arrangement above the least even one");
        }
        k *= 2;
    }
}

impl AlphabetU {
    fn derive_bias(&mut self) -> Result<()> {
        let excess = self.excess(self.n as usize)?;
        let removed = self.removed_count();
        // ties resolved by the smallest chunk value, which is the BTreeMap order
        let best = excess.iter().fold(None::<(&Vec<u32>, i64)>, |acc, (k, &e)| match acc {
            Some((_, top)) if top >= e => acc,
            _ => Some((k, e)),
        });
        let Some((d, top)) = best.filter(|(_, e)| *e > 0) else {
            return internal(format!("alphabet is not biased for n = {}", self.n));
        };
        self.d = DigitBlock::new(self.s, d.clone())?;
        self.c_def = ratio::int(removed as i64 * top);
        let bits = self.ell_u.to_u64().map(|l| l.saturating_mul(64 - (self.s as u64).leading_zeros() as u64));
        self.eps = match bits {
            Some(b) if b <= EPS_BIT_LIMIT => {
                let ell_u = self.ell_u.to_u32().expect("bounded by the bit limit");
                let size = BigUint::from(self.s).pow(ell_u) - BigUint::from(removed);
                let den = BigInt::from(size) * BigInt::from(self.ell_u.clone()) * 2;
                Some(&self.c_def * ratio::int(self.n) / BigRational::from_integer(den))
            }
            _ => None,
        };
        Ok(())
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn ms(&self) -> &BTreeSet<u64> {
        &self.ms
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn c(&self) -> u64 {
        self.c
    }

    /// The block pair `(u, v)` behind `W`.
    pub fn block_pair(&self) -> (&DigitBlock, &DigitBlock) {
        (&self.u, &self.v)
    }

    pub fn chunk_multiset(&self) -> &ChunkMultiset {
        &self.w
    }

    pub fn ell_u(&self) -> &BigUint {
        &self.ell_u
    }

    /// `ℓ_U` when it is small enough to materialize blocks.
    pub fn ell_u_small(&self) -> Option<usize> {
        self.ell_u.to_u64().filter(|&l| l <= MATERIALIZE_LIMIT).map(|l| l as usize)
    }

    pub fn z(&self) -> &Arrangement {
        &self.z
    }

    pub fn z_tilde(&self) -> Option<&Arrangement> {
        self.z_tilde.as_ref()
    }

    pub fn removed_count(&self) -> u64 {
        1 + self.z_tilde.is_some() as u64
    }

    pub fn bias_digit(&self) -> &DigitBlock {
        &self.d
    }

    pub fn c_def(&self) -> &BigRational {
        &self.c_def
    }

    /// `ε`, or `None` when `s^ℓ_U` is too large to represent.
    pub fn eps(&self) -> Option<&BigRational> {
        self.eps.as_ref()
    }

    /// `occ((z;m), d) − (ℓ_U/m)/s^m` for every chunk `d` where it is non-zero.
    /// Identical for `z̃`, which has the same chunk multiset.
    pub fn excess(&self, m: usize) -> Result<BTreeMap<Vec<u32>, i64>> {
        if m == 0 || !self.w.chunk_len.is_multiple_of(m) {
            return invalid(format!("chunk length {m} does not divide {}", self.w.chunk_len));
        }
        let mut out: BTreeMap<Vec<u32>, i64> = BTreeMap::new();
        let weight = self.w.copies as i64;
        for c in self.u.digits().chunks_exact(m) {
            *out.entry(c.to_vec()).or_insert(0) += weight;
        }
        for c in self.v.digits().chunks_exact(m) {
            *out.entry(c.to_vec()).or_insert(0) -= weight;
        }
        out.retain(|_, e| *e != 0);
        Ok(out)
    }

    /// Balance of the excluded blocks for chunk length `m`, from the chunk
    /// statistics of `u` and `v`.
    pub fn is_balanced_for(&self, m: u64) -> Result<bool> {
        Ok(self.excess(m as usize)?.is_empty())
    }

    /// Writes out an arrangement digit by digit.
    pub fn materialize(&self, arr: &Arrangement) -> Result<DigitBlock> {
        if self.ell_u_small().is_none() {
            return Err(Error::TooLarge(format!(
                "alphabet block length {} exceeds the materialization limit {MATERIALIZE_LIMIT}",
                self.ell_u
            )));
        }
        let mut pending: BTreeMap<&[u32], u64> = BTreeMap::new();
        for c in &arr.suffix {
            *pending.entry(c.as_slice()).or_insert(0) += 1;
        }
        let mut digits = Vec::with_capacity(self.ell_u_small().unwrap_or(0));
        let mut missing = false;
        self.w.for_each_ascending(|chunk, mult| {
            let skip = pending.get(chunk).copied().unwrap_or(0);
            if skip > mult {
                missing = true;
            }
            for _ in 0..mult.saturating_sub(skip) {
                digits.extend_from_slice(chunk);
            }
        });
        if missing {
            return internal("arrangement suffix is not a sub-multiset of W");
        }
        for c in &arr.suffix {
            digits.extend_from_slice(c);
        }
        DigitBlock::new(self.s, digits)
    }

    pub fn z_block(&self) -> Result<DigitBlock> {
        self.materialize(&self.z)
    }

    pub fn z_tilde_block(&self) -> Result<Option<DigitBlock>> {
        self.z_tilde.as_ref().map(|a| self.materialize(a)).transpose()
    }

    /// Parity of an arrangement's integer value.
    pub fn is_even(&self, arr: &Arrangement) -> bool {
        if self.s % 2 == 1 {
            return true;
        }
        match arr.suffix.last() {
            Some(c) => ends_even(c),
            None => ends_even(&self.w.top(1)[0]),
        }
    }

    /// Compares two arrangements with equal suffix multisets.
    pub fn cmp_arrangements(&self, a: &Arrangement, b: &Arrangement) -> Result<std::cmp::Ordering> {
        let mut x = a.suffix.clone();
        let mut y = b.suffix.clone();
        x.sort();
        y.sort();
        if x != y {
            return invalid("arrangements have different explicit suffixes");
        }
        Ok(a.suffix.cmp(&b.suffix))
    }

    /// JSON document describing the alphabet.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let z = self.z_block()?.to_digit_string();
        let z_tilde = self.z_tilde_block()?.map(|b| b.to_digit_string());
        let eps = self
            .eps
            .as_ref()
            .ok_or_else(|| Error::TooLarge("epsilon denominator too large".into()))?;
        let doc = AlphabetDoc {
            s: self.s,
            m: self.ms.iter().copied().collect(),
            n: self.n,
            c: self.c,
            ell_u: self.ell_u.to_u64().ok_or_else(|| Error::TooLarge("ell_u exceeds u64".into()))?,
            z,
            z_tilde,
            d: self.d.to_digit_string(),
            c_def: ratio::to_text(&self.c_def),
            eps: ratio::to_text(eps),
        };
        Ok(serde_json::to_value(doc)?)
    }
}

#[derive(Serialize)]
struct AlphabetDoc {
    s: u32,
    #[serde(rename = "M")]
    m: Vec<u64>,
    n: u64,
    c: u64,
    ell_u: u64,
    z: String,
    z_tilde: Option<String>,
    d: String,
    c_def: String,
    eps: String,
}

/// `(d, ε, c_def)` for an alphabet whose `ε` is representable.
pub fn bias_constants(alphabet: &AlphabetU) -> Result<(DigitBlock, BigRational, BigRational)> {
    let eps = alphabet
        .eps()
        .cloned()
        .ok_or_else(|| Error::TooLarge(format!("s^ell_U with ell_U = {} is too large", alphabet.ell_u)))?;
    Ok((alphabet.d.clone(), eps, alphabet.c_def.clone()))
}
