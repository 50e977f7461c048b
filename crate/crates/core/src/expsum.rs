//! Exponential sums over digit positions and LeVeque's discrepancy bound.
//!
//! Phases `r^j t x` are reduced modulo 1 in exact integer arithmetic before
//! any floating-point evaluation, so large exponents lose no accuracy.

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::block::DigitBlock;
use crate::certified::{self, Interval};
use crate::error::{invalid, Result};
use crate::radix::{digits_to_biguint, SAdicNumber};
use crate::ratio;

/// Inputs of `A(x, R, T, a, ℓ)`.
#[derive(Clone, Debug)]
pub struct ExpSumQuery {
    pub x: BigRational,
    pub bases: Vec<u64>,
    pub multipliers: Vec<i64>,
    pub a: u64,
    pub ell: u64,
}

/// `num / den` for `0 <= num < den` as a float.
pub(crate) fn unit_fraction(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let extra = den.bits() as usize + 64;
    let scaled: BigUint = (num << extra) / den;
    let shift = scaled.bits().saturating_sub(64);
    let top = u64::try_from(&(&scaled >> shift)).unwrap_or(u64::MAX);
    top as f64 * 2f64.powi(shift as i32 - extra as i32)
}

fn phasor(f: f64) -> (f64, f64) {
    let angle = 2.0 * PI * f;
    (angle.cos(), angle.sin())
}

fn inner_sum(x: &BigRational, r: u64, t: i64, a: u64, ell: u64) -> Result<f64> {
    let j0 = certified::nat_pos(a, r)?;
    let j1 = certified::nat_pos(a + ell, r)?;
    let q = x.denom().magnitude().clone();
    let p = x.numer().magnitude().clone();
    let rb = BigUint::from(r);
    // residue of r^j·t·p modulo q, starting at j = j0 + 1
    let tq = BigInt::from(t).mod_floor(&BigInt::from(q.clone())).magnitude().clone();
    let mut m = (tq * p % &q) * rb.modpow(&BigUint::from(j0 + 1), &q) % &q;
    let (mut re, mut im) = (0.0, 0.0);
    for _ in j0 + 1..=j1 {
        let (c, s) = phasor(unit_fraction(&m, &q));
        re += c;
        im += s;
        m = m * &rb % &q;
    }
    Ok(re * re + im * im)
}

/// `Σ_t Σ_r |Σ_j e(r^j t x)|²` over `j ∈ (⟨a;r⟩, ⟨a+ℓ;r⟩]`. The result is
/// independent of the thread count: terms are reduced in input order.
pub fn exp_sum(q: &ExpSumQuery) -> Result<f64> {
    if q.x.is_negative() || q.x >= BigRational::one() {
        return invalid("x must lie in [0, 1)");
    }
    if q.bases.iter().any(|&r| r < 2) {
        return invalid("bases must be at least 2");
    }
    if q.multipliers.contains(&0) {
        return invalid("multipliers must be non-zero");
    }
    let pairs: Vec<(i64, u64)> = q
        .multipliers
        .iter()
        .flat_map(|&t| q.bases.iter().map(move |&r| (t, r)))
        .collect();
    let terms = pairs
        .par_iter()
        .map(|&(t, r)| inner_sum(&q.x, r, t, q.a, q.ell))
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// The truncation parameters `T = {1..k}` and `γ` for a target discrepancy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevequeParams {
    pub k: u64,
    pub gamma: BigRational,
}

impl LevequeParams {
    pub fn multipliers(&self) -> Vec<u64> {
        (1..=self.k).collect()
    }
}

fn pi_squared(prec: u32) -> Interval {
    let p = certified::pi(prec);
    p.mul_nonneg(&p)
}

/// `k = ⌈12/(ε³π²)⌉` and `γ = ε³/2`.
pub fn leveque_params(eps: &BigRational) -> Result<LevequeParams> {
    if !eps.is_positive() || eps > &BigRational::one() {
        return invalid("eps must lie in (0, 1]");
    }
    let cube = eps * eps * eps;
    let twelve = ratio::int(12);
    let k = certified::certified_ceil(|p| Ok(pi_squared(p).scale(&cube).div_into(&twelve)))?;
    Ok(LevequeParams {
        k: u64::try_from(k).map_err(|_| crate::Error::TooLarge("k exceeds u64".into()))?,
        gamma: cube / ratio::int(2),
    })
}

/// LeVeque's upper bound on the digit discrepancy of `w`, appended to `x`
/// at positions `a+1..`, with the frequency sum truncated at `t_cap` and the
/// remainder bounded by `1/t_cap`.
///
/// Only the digits of `w` influence `frac(s^j x_w)` for `j >= a`, so `x`
/// contributes its base and precision.
pub fn leveque_bound(w: &DigitBlock, x: &SAdicNumber, t_cap: u64) -> Result<f64> {
    if x.base() != &BigUint::from(w.base()) {
        return invalid("context number and block use different bases");
    }
    if w.is_empty() || t_cap == 0 {
        return invalid("need a non-empty block and t_cap >= 1");
    }
    let ell = w.len();
    let base = BigUint::from(w.base());
    // frac(s^(a+i) x_w) = M_i / s^(ℓ−i) with M_i the value of w[i..]
    let fracs: Vec<(BigUint, BigUint)> = (0..ell)
        .map(|i| (digits_to_biguint(&w.digits()[i..], w.base()), base.pow((ell - i) as u32)))
        .collect();
    let terms: Vec<f64> = (1..=t_cap)
        .into_par_iter()
        .map(|t| {
            let tb = BigUint::from(t);
            let (mut re, mut im) = (0.0, 0.0);
            for (m, den) in &fracs {
                let (c, s) = phasor(unit_fraction(&(&tb * m % den), den));
                re += c;
                im += s;
            }
            let norm = (re * re + im * im) / (ell * ell) as f64;
            norm / (t * t) as f64
        })
        .collect();
    let total: f64 = terms.iter().sum::<f64>() + 1.0 / t_cap as f64;
    Ok((6.0 / (PI * PI) * total).cbrt())
}
