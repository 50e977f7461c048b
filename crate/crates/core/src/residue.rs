//! Residue-class combinatorics: fair residue multisets, even/odd subset sums,
//! integer sets that agree modulo some moduli and disagree modulo another, and
//! a subset-sum counting oracle for the Haiman parity identity.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{invalid, Result};

/// Finite multiset of non-negative integers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntMultiset {
    entries: BTreeMap<u64, u64>,
}

impl IntMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `mult` copies of `value`; a zero multiplicity is ignored.
    pub fn insert(&mut self, value: u64, mult: u64) {
        if mult > 0 {
            *self.entries.entry(value).or_insert(0) += mult;
        }
    }

    pub fn multiplicity(&self, value: u64) -> u64 {
        self.entries.get(&value).copied().unwrap_or(0)
    }

    /// Total number of elements counted with multiplicity.
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(value, multiplicity)` pairs in increasing value order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.entries.iter().map(|(&v, &m)| (v, m))
    }

    /// Multiset of residues modulo `m`.
    pub fn reduce(&self, m: u64) -> IntMultiset {
        let mut out = IntMultiset::new();
        for (v, k) in self.iter() {
            out.insert(v % m, k);
        }
        out
    }
}

impl FromIterator<u64> for IntMultiset {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut out = IntMultiset::new();
        for v in iter {
            out.insert(v, 1);
        }
        out
    }
}

/// Parameters of `p(n, σ, v, k)`: ways to write `sigma` as a sum of `v`
/// elements taken from the multiset holding each of `1..n` exactly `k` times.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionSpec {
    pub n: u64,
    pub sigma: u64,
    pub v: u64,
    pub k: u64,
}

impl PartitionSpec {
    pub fn new(n: u64, sigma: u64, v: u64, k: u64) -> Result<Self> {
        if n == 0 {
            return invalid("modulus n must be at least 1");
        }
        if k == 0 {
            return invalid("repetition count k must be at least 1");
        }
        Ok(Self { n, sigma, v, k })
    }
}

pub fn euler_phi(n: u64) -> Result<u64> {
    if n == 0 {
        return invalid("euler_phi is undefined at 0");
    }
    let mut result = n;
    let mut rest = n;
    let mut p = 2;
    while p * p <= rest {
        if rest.is_multiple_of(p) {
            while rest.is_multiple_of(p) {
                rest /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if rest > 1 {
        result -= result / rest;
    }
    Ok(result)
}

fn binomial_row(k: u64) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for i in 0..k {
        let next = &row[i as usize] * BigUint::from(k - i) / BigUint::from(i + 1);
        row.push(next);
    }
    row
}

/// `table[v][σ]` = number of ways to pick `v` elements of the multiset
/// `{1..n-1} × k` (copies are distinguishable) summing to `σ`.
fn subset_sum_table(n: u64, k: u64) -> Vec<Vec<BigUint>> {
    let values = n.saturating_sub(1);
    let max_v = (values * k) as usize;
    let max_sum = (k * values * (values + 1) / 2) as usize;
    let weights = binomial_row(k);
    let mut table = vec![vec![BigUint::zero(); max_sum + 1]; max_v + 1];
    table[0][0] = BigUint::one();
    for value in 1..=values {
        let mut next = vec![vec![BigUint::zero(); max_sum + 1]; max_v + 1];
        for (used, row) in table.iter().enumerate() {
            for (sum, ways) in row.iter().enumerate() {
                if ways.is_zero() {
                    continue;
                }
                for (c, weight) in weights.iter().enumerate() {
                    let u = used + c;
                    let s = sum + c * value as usize;
                    if u > max_v || s > max_sum {
                        break;
                    }
                    next[u][s] += ways * weight;
                }
            }
        }
        table = next;
    }
    table
}

/// `p(n, σ, v, k)` by dynamic programming over values, counts and sums.
pub fn partition_count(spec: &PartitionSpec) -> BigUint {
    let table = subset_sum_table(spec.n, spec.k);
    table
        .get(spec.v as usize)
        .and_then(|row| row.get(spec.sigma as usize))
        .cloned()
        .unwrap_or_default()
}

/// Signed count over sums divisible by `n`: even-size selections minus
/// odd-size selections.
pub fn haiman_difference(n: u64, k: u64) -> Result<BigInt> {
    PartitionSpec::new(n, 0, 0, k)?;
    let table = subset_sum_table(n, k);
    let mut total = BigInt::zero();
    for (v, row) in table.iter().enumerate() {
        for (sigma, ways) in row.iter().enumerate() {
            if !(sigma as u64).is_multiple_of(n) {
                continue;
            }
            let w = BigInt::from(ways.clone());
            if v % 2 == 0 {
                total += w;
            } else {
                total -= w;
            }
        }
    }
    Ok(total)
}

/// Closed form `n^(k-1) φ(n)` of [`haiman_difference`].
pub fn haiman_closed_form(n: u64, k: u64) -> Result<BigInt> {
    PartitionSpec::new(n, 0, 0, k)?;
    Ok(BigInt::from(n).pow((k - 1) as u32) * BigInt::from(euler_phi(n)?))
}

/// Entry `r` counts the elements of `x` congruent to `r` modulo `m`.
pub fn residue_counts(x: &BTreeSet<u64>, m: u64) -> Result<Vec<u64>> {
    if m == 0 {
        return invalid("modulus must be at least 1");
    }
    let mut counts = vec![0u64; m as usize];
    for &v in x {
        counts[(v % m) as usize] += 1;
    }
    Ok(counts)
}

/// True when `x` and `y` have equal residue-class counts modulo every `m`.
pub fn is_residue_equivalent(x: &BTreeSet<u64>, y: &BTreeSet<u64>, ms: &BTreeSet<u64>) -> Result<bool> {
    for &m in ms {
        if residue_counts(x, m)? != residue_counts(y, m)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_not_divisible(ms: &BTreeSet<u64>, n: u64) -> Result<()> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if ms.contains(&0) {
        return invalid("moduli must be positive");
    }
    if let Some(m) = ms.iter().find(|&&m| m % n == 0) {
        return invalid(format!("{n} divides {m}"));
    }
    Ok(())
}

/// Enlarges `ms` so each non-zero residue modulo `n` occurs equally often,
/// adding the smallest missing representatives of each short class.
pub fn fair_extension(ms: &BTreeSet<u64>, n: u64) -> Result<BTreeSet<u64>> {
    check_not_divisible(ms, n)?;
    if n < 2 {
        return invalid("fair extension needs n >= 2");
    }
    let counts = residue_counts(ms, n)?;
    let k = counts[1..].iter().copied().max().unwrap_or(0).max(1);
    let mut out = ms.clone();
    for r in 1..n {
        let mut have = counts[r as usize];
        let mut candidate = r;
        while have < k {
            if out.insert(candidate) {
                have += 1;
            }
            candidate += n;
        }
    }
    Ok(out)
}

/// Sums of the even-size and odd-size subsets of `ms`.
pub fn even_odd_sums(ms: &BTreeSet<u64>) -> (IntMultiset, IntMultiset) {
    // sums[parity] maps sum -> number of subsets
    let mut sums: [BTreeMap<u64, u64>; 2] = [BTreeMap::from([(0, 1)]), BTreeMap::new()];
    for &m in ms {
        let mut next: [BTreeMap<u64, u64>; 2] = [sums[0].clone(), sums[1].clone()];
        for parity in 0..2 {
            for (&s, &c) in &sums[parity] {
                *next[1 - parity].entry(s + m).or_insert(0) += c;
            }
        }
        sums = next;
    }
    let build = |map: &BTreeMap<u64, u64>| {
        let mut out = IntMultiset::new();
        for (&v, &c) in map {
            out.insert(v, c);
        }
        out
    };
    (build(&sums[0]), build(&sums[1]))
}

/// Everything derived while separating residue classes for `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueWitness {
    /// Fair extension of the input moduli.
    pub extended: BTreeSet<u64>,
    /// `lcm` of the extended moduli and `n`.
    pub modulus: u64,
    pub x: BTreeSet<u64>,
    pub y: BTreeSet<u64>,
}

fn canonical_set(ms: &IntMultiset, modulus: u64) -> BTreeSet<u64> {
    let reduced = ms.reduce(modulus);
    let mut out = BTreeSet::new();
    for (c, mu) in reduced.iter() {
        for i in 0..mu {
            out.insert(c + i * modulus);
        }
    }
    out
}

pub fn residue_witness(ms: &BTreeSet<u64>, n: u64) -> Result<ResidueWitness> {
    if ms.is_empty() {
        return invalid("moduli set must be non-empty");
    }
    let extended = fair_extension(ms, n)?;
    let modulus = extended.iter().fold(n, |acc, &m| acc.lcm(&m));
    let (even, odd) = even_odd_sums(&extended);
    Ok(ResidueWitness {
        x: canonical_set(&even, modulus),
        y: canonical_set(&odd, modulus),
        extended,
        modulus,
    })
}

/// Sets `(X, Y)` residue equivalent for the fair extension of `ms` but not
/// for `n`.
pub fn minimal_residue_sets(ms: &BTreeSet<u64>, n: u64) -> Result<(BTreeSet<u64>, BTreeSet<u64>)> {
    let w = residue_witness(ms, n)?;
    Ok((w.x, w.y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[u64]) -> BTreeSet<u64> {
        v.iter().copied().collect()
    }

    #[test]
    fn phi_values() {
        assert_eq!(euler_phi(1).unwrap(), 1);
        assert_eq!(euler_phi(7).unwrap(), 6);
        assert_eq!(euler_phi(6).unwrap(), 2);
        assert_eq!(euler_phi(36).unwrap(), 12);
        assert!(euler_phi(0).is_err());
    }

    #[test]
    fn partition_examples() {
        let p = |n, s, v, k| partition_count(&PartitionSpec::new(n, s, v, k).unwrap());
        assert_eq!(p(3, 6, 4, 2), BigUint::from(1u8));
        for k in 1..=5 {
            assert_eq!(p(2, 1, 1, k), BigUint::from(k));
        }
        assert_eq!(p(3, 3, 2, 1), BigUint::from(1u8));
        assert_eq!(p(3, 100, 1, 1), BigUint::zero());
        assert!(PartitionSpec::new(0, 0, 0, 1).is_err());
    }

    #[test]
    fn haiman_values() {
        let cases = [(1, 1, 1), (1, 2, 1), (2, 1, 1), (2, 2, 2), (3, 1, 2), (3, 2, 6), (4, 1, 2), (4, 2, 8)];
        for (n, k, want) in cases {
            assert_eq!(haiman_difference(n, k).unwrap(), BigInt::from(want), "n={n} k={k}");
        }
    }

    #[test]
    fn residue_count_examples() {
        assert_eq!(residue_counts(&set(&[0, 5]), 2).unwrap(), vec![1, 1]);
        assert_eq!(residue_counts(&set(&[0, 3, 4, 5]), 4).unwrap(), vec![2, 1, 0, 1]);
        assert_eq!(residue_counts(&set(&[]), 3).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn equivalence_examples() {
        assert!(is_residue_equivalent(&set(&[0, 5]), &set(&[2, 3]), &set(&[2, 3])).unwrap());
        assert!(!is_residue_equivalent(&set(&[0, 5]), &set(&[2, 3]), &set(&[4])).unwrap());
    }

    #[test]
    fn fair_extension_examples() {
        assert_eq!(fair_extension(&set(&[2, 3]), 4).unwrap(), set(&[1, 2, 3]));
        assert_eq!(fair_extension(&set(&[1]), 2).unwrap(), set(&[1]));
        assert_eq!(fair_extension(&set(&[3]), 2).unwrap(), set(&[3]));
        assert_eq!(fair_extension(&set(&[1, 4]), 3).unwrap(), set(&[1, 2, 4, 5]));
        assert!(fair_extension(&set(&[4]), 2).is_err());
    }

    #[test]
    fn even_odd_examples() {
        let (e, o) = even_odd_sums(&set(&[1]));
        assert_eq!(e, [0].into_iter().collect());
        assert_eq!(o, [1].into_iter().collect());
        let (e, o) = even_odd_sums(&set(&[1, 2]));
        assert_eq!(e, [0, 3].into_iter().collect());
        assert_eq!(o, [1, 2].into_iter().collect());
        let (e, o) = even_odd_sums(&set(&[]));
        assert_eq!(e.total(), 1);
        assert!(o.is_empty());
    }

    #[test]
    fn minimal_set_examples() {
        assert_eq!(minimal_residue_sets(&set(&[1]), 2).unwrap(), (set(&[0]), set(&[1])));
        assert_eq!(
            minimal_residue_sets(&set(&[2, 3]), 4).unwrap(),
            (set(&[0, 3, 4, 5]), set(&[1, 2, 3, 6]))
        );
        assert_eq!(minimal_residue_sets(&set(&[3]), 2).unwrap(), (set(&[0]), set(&[3])));
        assert_eq!(residue_witness(&set(&[2, 3]), 4).unwrap().modulus, 12);
        assert!(minimal_residue_sets(&set(&[2]), 2).is_err());
    }
}
