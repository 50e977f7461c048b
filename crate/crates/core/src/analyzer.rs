//! Independent verification and measurement.
//!
//! * [`digit_report`] measures digit frequencies of a constructed number.
//! * [`verify_stage_log`] replays a stage log from the profile alone and
//!   rechecks every stage condition with its own counting code.
//! * The `check_*` predicates are finite renderings of the discrepancy
//!   lemmas the construction relies on. Each returns a three-way outcome so a
//!   violated premise is never confused with a failed conclusion.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
#[cfg(test)]
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::block::DigitBlock;
use crate::certified;
use crate::engine::{Schedule, StageRecord, MAX_ATTEMPTS};
use crate::error::{invalid, Error, Result};
use crate::profile::NormalityProfile;
use crate::radix::{digits_to_biguint, extract_digits, extract_rational_digits, leftmost_tadic_subinterval, Radix, SAdicNumber};
use crate::ratio;

/// Digit counts of one base at one checkpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportRow {
    pub base: u64,
    pub checkpoint: u64,
    pub counts: Vec<u64>,
    pub discrepancy: BigRational,
}

impl ReportRow {
    pub fn frequency(&self, digit: usize) -> BigRational {
        ratio::frac(self.counts[digit] as i64, self.checkpoint as i64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiscrepancyReport {
    pub rows: Vec<ReportRow>,
}

fn tally_discrepancy(counts: &[u64], len: u64) -> BigRational {
    // max_d |c_d / len − 1/r|, computed directly from the counts
    let r = counts.len() as i64;
    let worst = counts
        .iter()
        .map(|&c| (BigInt::from(c) * r - BigInt::from(len)).abs())
        .max()
        .unwrap_or_default();
    BigRational::new(worst, BigInt::from(len) * r)
}

/// Digit counts and discrepancy of `x` in each base at each checkpoint.
/// `b` is the nat position up to which the digits of `x` are meaningful;
/// checkpoints may not exceed `⟨b; r⟩`.
pub fn digit_report(x: &SAdicNumber, b: u64, bases: &[u64], checkpoints: &[u64]) -> Result<DiscrepancyReport> {
    let mut bases: Vec<u64> = bases.to_vec();
    bases.sort_unstable();
    bases.dedup();
    let mut cps: Vec<u64> = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if cps.first() == Some(&0) {
        return invalid("checkpoints must be positive");
    }
    for &r in &bases {
        if !(2..=u32::MAX as u64).contains(&r) {
            return invalid(format!("base {r} out of range"));
        }
        let max = certified::nat_pos(b, r)?;
        if let Some(&cp) = cps.iter().find(|&&cp| cp > max) {
            return invalid(format!("checkpoint {cp} exceeds the {max} base-{r} digits available"));
        }
    }
    let per_base: Vec<Result<Vec<ReportRow>>> = bases
        .par_iter()
        .map(|&r| {
            let top = cps.last().copied().unwrap_or(0);
            let digits = extract_digits(x, r as u32, 0, top)?;
            let mut counts = vec![0u64; r as usize];
            let mut rows = Vec::new();
            let mut pos = 0usize;
            for &cp in &cps {
                while (pos as u64) < cp {
                    counts[digits.digits()[pos] as usize] += 1;
                    pos += 1;
                }
                rows.push(ReportRow { base: r, checkpoint: cp, counts: counts.clone(), discrepancy: tally_discrepancy(&counts, cp) });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_base {
        rows.extend(r?);
    }
    Ok(DiscrepancyReport { rows })
}

impl DiscrepancyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("base,checkpoint,digit,count,freq_num,freq_den,discrepancy_num,discrepancy_den,discrepancy_float\n");
        for row in &self.rows {
            for (digit, &count) in row.counts.iter().enumerate() {
                let f = row.frequency(digit);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    row.base,
                    row.checkpoint,
                    digit,
                    count,
                    f.numer(),
                    f.denom(),
                    row.discrepancy.numer(),
                    row.discrepancy.denom(),
                    ratio::to_f64(&row.discrepancy)
                );
            }
        }
        out
    }
}

/// Outcome of replaying a stage log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub stages: u64,
    pub failure: Option<(u64, String)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

fn chunk_counts(w: &[u32], m: usize) -> std::collections::HashMap<&[u32], u64> {
    let mut counts = std::collections::HashMap::new();
    for c in w.chunks_exact(m) {
        *counts.entry(c).or_insert(0) += 1;
    }
    counts
}

fn freq_of(w: &[u32], d: &[u32]) -> Option<BigRational> {
    let total = (w.len() / d.len()) as i64;
    (total > 0).then(|| ratio::frac(*chunk_counts(w, d.len()).get(d).unwrap_or(&0) as i64, total))
}

/// Simple discrepancy of `(w;m)` over `base^m` symbols.
fn disc_of(w: &[u32], base: u64, m: usize) -> Option<BigRational> {
    let total = (w.len() / m) as u64;
    if total == 0 {
        return None;
    }
    let alphabet = BigInt::from(base).pow(m as u32);
    let counts = chunk_counts(w, m);
    let mut worst = BigInt::zero();
    for &c in counts.values() {
        worst = worst.max((BigInt::from(c) * &alphabet - BigInt::from(total)).abs());
    }
    if BigInt::from(counts.len()) < alphabet {
        worst = worst.max(BigInt::from(total));
    }
    Some(BigRational::new(worst, BigInt::from(total) * alphabet))
}

struct Replay<'a> {
    schedule: &'a Schedule,
    t: u64,
    j: u64,
    b: u64,
    x: SAdicNumber,
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Ok(Some(format!($($msg)*)));
        }
    };
}

impl Replay<'_> {
    fn own_powers(&self, j: u64) -> Result<BTreeSet<u64>> {
        let ph = self.schedule.phase(j)?;
        Ok(ph.m_set.iter().filter_map(|&m| ph.s.checked_pow(m as u32)).collect())
    }

    fn position_ok(&self) -> Result<bool> {
        let cur = self.schedule.phase(self.j)?.s_star();
        let next = self.schedule.phase(self.j + 1)?.s_star();
        let reach = self.b + certified::ceil_log_sum(cur.root, cur.exp, next.root, next.exp)? + self.schedule.ell(self.j + 1, 0)?;
        let own = self.own_powers(self.j)?;
        for &r in self.schedule.r_list(self.j + 1) {
            if own.contains(&r) {
                continue;
            }
            let lo = certified::nat_pos(self.b, r)?;
            let hi = certified::nat_pos(reach, r)?;
            if (hi - lo) * (self.j + 1) >= lo {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `Ok(None)` when the record is consistent, `Ok(Some(reason))` otherwise.
    fn check(&mut self, rec: &StageRecord) -> Result<Option<String>> {
        ensure!(rec.t == self.t, "stage counter {} where {} was expected", rec.t, self.t);
        ensure!(rec.j_prev == self.j && rec.b_prev == self.b, "record does not continue the previous stage");
        let cur = self.schedule.phase(self.j)?;

        let cond1 = self.position_ok()?;
        let prefix_len = certified::nat_pos(self.b, cur.s)?;
        let prefix = extract_digits(&self.x, cur.s as u32, 0, prefix_len)?;
        let prefix_freq = freq_of(prefix.digits(), cur.d().digits());
        let half = cur.eps() / ratio::int(2);
        let cond2 = prefix_freq.as_ref().is_some_and(|f| f < &(cur.uniform_share() - half));
        ensure!(rec.cond1 == cond1, "condition (1) recorded as {} but evaluates to {cond1}", rec.cond1);
        ensure!(rec.cond2 == cond2, "condition (2) recorded as {} but evaluates to {cond2}", rec.cond2);
        ensure!(
            rec.prefix_freq == prefix_freq.as_ref().map(ratio::to_text),
            "prefix frequency recorded as {:?}",
            rec.prefix_freq
        );

        let advance = cond1 && cond2;
        ensure!(rec.j == self.j + advance as u64, "phase index {} does not follow the conditions", rec.j);
        let (a, y) = if advance {
            let s = cur.s_star();
            let t = self.schedule.phase(rec.j)?.s_star();
            leftmost_tadic_subinterval(&self.x.interval(), s, self.b, t)?
        } else {
            (self.b, self.x.clone())
        };
        ensure!(rec.a == a, "start position {} where {a} was expected", rec.a);
        ensure!(rec.y == y, "start point differs from the replayed one");

        let ph = self.schedule.phase(rec.j)?;
        ensure!(rec.s == ph.s && rec.n == ph.n, "phase pair ({}, {}) where ({}, {}) was expected", rec.s, rec.n, ph.s, ph.n);
        ensure!(rec.ell_attempt < MAX_ATTEMPTS, "attempt counter out of range");
        let ell = self.schedule.ell(rec.j, rec.ell_attempt)?;
        ensure!(rec.ell == ell && rec.b == a + ell, "block length {} where {ell} was expected", rec.ell);
        ensure!(rec.candidates >= 1, "candidate counter is zero");

        let star = ph.s_star();
        let symbols = star.nat_pos(rec.b)? - star.nat_pos(a)?;
        ensure!(rec.symbols == symbols, "symbol count {} where {symbols} was expected", rec.symbols);
        let w = match DigitBlock::parse(ph.s as u32, &rec.block) {
            Ok(w) => w,
            Err(e) => return Ok(Some(format!("block unreadable: {e}"))),
        };
        let ell_u = ph.alphabet.ell_u;
        ensure!(w.len() as u64 == symbols * ell_u as u64, "block has {} digits, expected {}", w.len(), symbols * ell_u as u64);
        for (i, sym) in w.digits().chunks_exact(ell_u).enumerate() {
            let excluded = sym == ph.alphabet.z.as_slice() || ph.alphabet.z_tilde.as_deref() == Some(sym);
            ensure!(!excluded, "symbol {i} of the block is an excluded alphabet block");
        }
        let x_next = y.extend(symbols, &digits_to_biguint(w.digits(), w.base()))?;
        ensure!(rec.x == x_next, "recorded x differs from start point plus block");

        let tol = ph.tolerance();
        let freq = freq_of(w.digits(), ph.d().digits());
        let Some(freq) = freq else {
            return Ok(Some("block shorter than one bias chunk".into()));
        };
        ensure!(freq < ph.uniform_share() - ph.eps(), "bias condition fails: frequency {}", ratio::to_text(&freq));
        ensure!(rec.block_freq == ratio::to_text(&freq), "block frequency recorded as {}", rec.block_freq);

        ensure!(rec.block_disc.len() == ph.m_set.len(), "block discrepancy list has the wrong length");
        for (&m, got) in ph.m_set.iter().zip(&rec.block_disc) {
            let d = disc_of(w.digits(), ph.s, m as usize);
            ensure!(d.as_ref().is_some_and(|d| d < &tol), "block is unbalanced for chunk length {m}");
            ensure!(got.m == m && Some(&got.disc) == d.as_ref().map(ratio::to_text).as_ref(), "recorded discrepancy for m = {m} differs");
        }

        ensure!(rec.transfer_disc.len() == ph.transfer_bases.len(), "window list has the wrong length");
        for (&r, got) in ph.transfer_bases.iter().zip(&rec.transfer_disc) {
            let (i0, i1) = (certified::nat_pos(a, r)?, certified::nat_pos(rec.b, r)?);
            let u = extract_digits(&x_next, r as u32, i0, i1)?;
            let d = disc_of(u.digits(), r, 1);
            ensure!(d.as_ref().is_some_and(|d| d < &tol), "base-{r} window ({i0}, {i1}] is unbalanced");
            ensure!(
                got.r == r && got.from == i0 && got.to == i1 && Some(&got.disc) == d.as_ref().map(ratio::to_text).as_ref(),
                "recorded base-{r} window discrepancy differs"
            );
        }
        let eta = ratio::from_text(&rec.eta_lower)?;
        ensure!(eta == ph.alphabet.eta_lower, "eta bound differs");
        ensure!(eta.is_positive() && eta < BigRational::one(), "eta bound outside (0, 1)");

        self.t += 1;
        self.j = rec.j;
        self.b = rec.b;
        self.x = x_next;
        Ok(None)
    }
}

/// Replays a stage log against a profile.
pub fn verify_stage_log(records: &[StageRecord], profile: &NormalityProfile) -> Result<VerifyReport> {
    let schedule = Schedule::new(profile)?;
    let mut replay = Replay {
        schedule: &schedule,
        t: 0,
        j: 0,
        b: 0,
        x: SAdicNumber::zero(schedule.phase(0)?.s_star().value())?,
    };
    for rec in records {
        if replay.b >= profile.until_b {
            return Ok(VerifyReport { stages: replay.t, failure: Some((rec.t, "stage recorded after the target position".into())) });
        }
        if let Some(reason) = replay.check(rec)? {
            return Ok(VerifyReport { stages: replay.t, failure: Some((rec.t, reason)) });
        }
    }
    if replay.b < profile.until_b {
        return Ok(VerifyReport {
            stages: replay.t,
            failure: Some((replay.t, format!("log ends at position {} before the target {}", replay.b, profile.until_b))),
        });
    }
    Ok(VerifyReport { stages: replay.t, failure: None })
}

/// Three-way result of a lemma check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LemmaOutcome {
    Holds,
    Fails(String),
    PremiseFailure(String),
}

impl LemmaOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, LemmaOutcome::Holds)
    }
}

fn digit_disc(w: &[u32], base: u32) -> Option<BigRational> {
    disc_of(w, base as u64, 1)
}

/// Appending a short block `u` to a block `w` of discrepancy below `eps`
/// keeps the discrepancy below `2 eps`.
pub fn check_append_bound(w: &DigitBlock, u: &DigitBlock, eps: &BigRational) -> Result<LemmaOutcome> {
    if w.base() != u.base() {
        return invalid("blocks over different bases");
    }
    let Some(dw) = digit_disc(w.digits(), w.base()) else {
        return Ok(LemmaOutcome::PremiseFailure("w is empty".into()));
    };
    if ratio::int(u.len() as i64) >= eps * ratio::int(w.len() as i64) {
        return Ok(LemmaOutcome::PremiseFailure("|u| >= eps |w|".into()));
    }
    if &dw >= eps {
        return Ok(LemmaOutcome::PremiseFailure("D(w) >= eps".into()));
    }
    let wu = w.concat(u)?;
    let d = digit_disc(wu.digits(), w.base()).expect("non-empty");
    Ok(if d < eps * ratio::int(2) {
        LemmaOutcome::Holds
    } else {
        LemmaOutcome::Fails(format!("D(wu) = {}", ratio::to_text(&d)))
    })
}

fn check_cuts(stream: &DigitBlock, cuts: &[u64]) -> Result<()> {
    if cuts.len() < 2 || cuts.windows(2).any(|p| p[0] >= p[1]) {
        return invalid("need at least two strictly increasing cut positions");
    }
    if *cuts.last().expect("non-empty") > stream.len() as u64 {
        return invalid("cut beyond the end of the stream");
    }
    Ok(())
}

/// First segment index from which every later segment satisfies `ok`.
fn tail_start(segments: usize, ok: impl Fn(usize) -> bool) -> Option<usize> {
    let mut t0 = segments;
    while t0 > 0 && ok(t0 - 1) {
        t0 -= 1;
    }
    (t0 < segments).then_some(t0)
}

/// Finite rendering of the limit bound: once segments are short relative
/// to their start and have discrepancy below `eps`, every later prefix of
/// length `N` has discrepancy below `2 eps + h/N`, where `h` is the start of
/// that tail.
pub fn check_limit_bound(stream: &DigitBlock, cuts: &[u64], eps: &BigRational) -> Result<LemmaOutcome> {
    check_cuts(stream, cuts)?;
    let digits = stream.digits();
    let segs = cuts.len() - 1;
    let seg_ok = |t: usize| {
        let (lo, hi) = (cuts[t], cuts[t + 1]);
        lo > 0
            && ratio::int((hi - lo) as i64) <= eps * ratio::int(lo as i64)
            && digit_disc(&digits[lo as usize..hi as usize], stream.base()).is_some_and(|d| &d < eps)
    };
    let Some(t0) = tail_start(segs, seg_ok) else {
        return Ok(LemmaOutcome::PremiseFailure("the last segment violates the premises".into()));
    };
    let h = cuts[t0];
    let base = stream.base() as usize;
    let mut counts = vec![0u64; base];
    for &d in &digits[..h as usize] {
        counts[d as usize] += 1;
    }
    // D(prefix_N) = w/(N V) with w = max |c V − N|, so the bound fails iff
    // q w >= (2 p N + q h) V for eps = p/q
    let small = |x: &BigInt| x.to_i128().filter(|v| v.abs() < 1 << 40);
    let pq = small(eps.numer()).zip(small(eps.denom()));
    let v = base as i128;
    let two = eps * ratio::int(2);
    for n in h as usize..cuts[segs] as usize {
        counts[digits[n] as usize] += 1;
        let len = n as u64 + 1;
        let fails = match pq {
            Some((p, q)) => {
                let worst = counts.iter().map(|&c| (c as i128 * v - len as i128).abs()).max().unwrap_or(0);
                q * worst >= (2 * p * len as i128 + q * h as i128) * v
            }
            None => tally_discrepancy(&counts, len) >= &two + ratio::frac(h as i64, len as i64),
        };
        if fails {
            let d = tally_discrepancy(&counts, len);
            return Ok(LemmaOutcome::Fails(format!("prefix of length {len} has discrepancy {}", ratio::to_text(&d))));
        }
    }
    Ok(LemmaOutcome::Holds)
}

/// Finite rendering of the lim-inf deficit: when every tail segment has
/// `d`-frequency below `1/r − eps` and the stream is long compared with the
/// head, some checkpoint has `d`-frequency below `1/r − eps/2`.
pub fn check_liminf_deficit(stream: &DigitBlock, cuts: &[u64], d: u32, eps: &BigRational) -> Result<LemmaOutcome> {
    check_cuts(stream, cuts)?;
    if d >= stream.base() {
        return invalid(format!("digit {d} out of range for base {}", stream.base()));
    }
    let digits = stream.digits();
    let share = ratio::recip(stream.base() as i64);
    let seg_freq = |t: usize| {
        let seg = &digits[cuts[t] as usize..cuts[t + 1] as usize];
        ratio::frac(seg.iter().filter(|&&x| x == d).count() as i64, seg.len() as i64)
    };
    let segs = cuts.len() - 1;
    let Some(t0) = tail_start(segs, |t| seg_freq(t) < &share - eps) else {
        return Ok(LemmaOutcome::PremiseFailure("the last segment is not biased".into()));
    };
    let h = cuts[t0];
    let last = cuts[segs];
    if ratio::int(last as i64) * eps <= ratio::int(2 * h as i64) {
        return Ok(LemmaOutcome::PremiseFailure("stream too short compared with its head".into()));
    }
    let target = &share - eps / ratio::int(2);
    let mut occ = 0u64;
    let mut pos = 0usize;
    for &cp in &cuts[1..] {
        while (pos as u64) < cp {
            occ += (digits[pos] == d) as u64;
            pos += 1;
        }
        if ratio::frac(occ as i64, cp as i64) < target {
            return Ok(LemmaOutcome::Holds);
        }
    }
    Ok(LemmaOutcome::Fails("no checkpoint shows the deficit".into()))
}

/// Digit windows of a point `q` of precision `⟨b; s⟩` and of any `x` in its
/// interval: if `q`'s base-`r` and base-`r^p` windows over `(⟨a;·⟩, ⟨b;·⟩]`
/// have discrepancy below `eps`, `2/r^p < eps` and `3p/|u| < eps`, then the
/// base-`r` window of `x` has discrepancy below `5 eps`.
pub fn check_transfer(
    q: &SAdicNumber,
    x: &BigRational,
    r: u64,
    p: u32,
    a: u64,
    b: u64,
    eps: &BigRational,
) -> Result<LemmaOutcome> {
    let s = q.base().to_u64().ok_or_else(|| Error::InvalidArgument("base of q too large".into()))?;
    if q.prec() != Radix::simple(s)?.nat_pos(b)? {
        return invalid("q must have precision <b; s>");
    }
    let ulp = q.interval();
    if !ulp.contains(x) {
        return invalid("x must lie in [q, q + s^-prec)");
    }
    if a > b || p == 0 || r < 2 {
        return invalid("need a <= b, p >= 1 and r >= 2");
    }
    let rp = r.checked_pow(p).filter(|&v| v <= u32::MAX as u64).ok_or_else(|| Error::TooLarge("r^p too large".into()))?;
    let (i0, i1) = (certified::nat_pos(a, r)?, certified::nat_pos(b, r)?);
    let (k0, k1) = (certified::nat_pos(a, rp)?, certified::nat_pos(b, rp)?);
    if i0 == i1 || k0 == k1 {
        return Ok(LemmaOutcome::PremiseFailure("empty digit window".into()));
    }
    let u = extract_digits(q, r as u32, i0, i1)?;
    let ut = extract_digits(q, rp as u32, k0, k1)?;
    let num = x.numer().to_biguint().ok_or_else(|| Error::InvalidArgument("x is negative".into()))?;
    let den = x.denom().to_biguint().expect("positive denominator");
    let v = extract_rational_digits(&num, &den, r as u32, i0, i1)?;

    let du = digit_disc(u.digits(), r as u32).expect("non-empty");
    let dut = digit_disc(ut.digits(), rp as u32).expect("non-empty");
    if &du >= eps {
        return Ok(LemmaOutcome::PremiseFailure("D(u) >= eps".into()));
    }
    if &dut >= eps {
        return Ok(LemmaOutcome::PremiseFailure("D(u~) >= eps".into()));
    }
    if ratio::frac(2, rp as i64) >= *eps {
        return Ok(LemmaOutcome::PremiseFailure("2/r^p >= eps".into()));
    }
    if ratio::frac(3 * p as i64, u.len() as i64) >= *eps {
        return Ok(LemmaOutcome::PremiseFailure("3p/|u| >= eps".into()));
    }
    let dv = digit_disc(v.digits(), r as u32).expect("non-empty");
    Ok(if dv < eps * ratio::int(5) {
        LemmaOutcome::Holds
    } else {
        LemmaOutcome::Fails(format!("D(v) = {}", ratio::to_text(&dv)))
    })
}
