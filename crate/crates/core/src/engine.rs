//! The stage recursion that builds the digits of `x`.
//!
//! Phase `j` fixes a base `s_j`, a denied exponent `n_j` and an alphabet
//! `U_j` of length-`ℓ_U` blocks; its digits are read in base
//! `s*_j = s_j^ℓ_U`. Each stage appends a block of `U_j`-symbols to `x`,
//! chosen from a seeded candidate stream as the first block that keeps the
//! required bases balanced and `s_j^n_j` biased. A stage moves to the next
//! phase when the position bookkeeping allows it and the prefix already
//! shows the bias.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{balanced_alphabet, AlphabetU};
use crate::block::{chunk_discrepancy, digit_discrepancy, DigitBlock};
use crate::certified::{self, certified_ceil};
use crate::error::{internal, Error, Result};
use crate::profile::{MSet, NormalityProfile};
use crate::radix::{digits_to_biguint, extract_digits, leftmost_tadic_subinterval, Radix, SAdicNumber};
use crate::ratio;

/// Candidates drawn per `ℓ` attempt before the block length is doubled.
pub const DEFAULT_BUDGET: u64 = 128;
/// Doublings of `ℓ` tried before giving up.
pub const MAX_ATTEMPTS: u32 = 20;
const BATCH: usize = 16;

/// Per-(base, exponent) alphabet data shared by every phase using it.
#[derive(Debug)]
pub struct PhaseAlphabet {
    pub alphabet: AlphabetU,
    pub s_star: Radix,
    pub ell_u: usize,
    pub z: Vec<u32>,
    pub z_tilde: Option<Vec<u32>>,
    pub eps: BigRational,
    pub eta_lower: BigRational,
}

/// Everything that depends on the phase index `j` alone.
#[derive(Clone, Debug)]
pub struct PhaseParams {
    pub j: u64,
    pub s: u64,
    pub n: u64,
    pub m_set: BTreeSet<u64>,
    pub r_list: Vec<u64>,
    pub p: u32,
    pub alphabet: Arc<PhaseAlphabet>,
    /// Bases whose digit windows must stay balanced (condition iv).
    pub transfer_bases: Vec<u64>,
}

impl PhaseParams {
    pub fn s_star(&self) -> Radix {
        self.alphabet.s_star
    }

    pub fn d(&self) -> &DigitBlock {
        self.alphabet.alphabet.bias_digit()
    }

    pub fn eps(&self) -> &BigRational {
        &self.alphabet.eps
    }

    /// `1 / (j + 1)`.
    pub fn tolerance(&self) -> BigRational {
        ratio::recip(self.j as i64 + 1)
    }

    /// `1 / s^n`.
    pub fn uniform_share(&self) -> BigRational {
        BigRational::new(One::one(), BigUint::from(self.s).pow(self.n as u32).into())
    }
}

/// Phase schedule derived from a profile.
#[derive(Debug)]
pub struct Schedule {
    profile: NormalityProfile,
    pairs: Vec<(u64, u64)>,
    r_enum: Vec<u64>,
    alphabets: HashMap<(u64, u64), Arc<PhaseAlphabet>>,
}

fn least_p(r_list: &[u64], j: u64) -> u32 {
    let target = 2 * (j as u128 + 1);
    let mut p = 1u32;
    while r_list.iter().any(|&r| (r as u128).checked_pow(p).is_some_and(|v| v < target)) {
        p += 1;
    }
    p
}

impl Schedule {
    pub fn new(profile: &NormalityProfile) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut r_enum = Vec::new();
        for e in profile.entries() {
            if let MSet::Finite(set) = &e.m {
                for n in 1..=profile.n_max {
                    if !set.contains(&n) {
                        pairs.push((e.s, n));
                    }
                }
            }
            for m in e.m.tracked() {
                let r = e
                    .s
                    .checked_pow(m as u32)
                    .filter(|&r| r <= u32::MAX as u64)
                    .ok_or_else(|| Error::Profile(format!("{}^{m} is too large to track", e.s)))?;
                r_enum.push(r);
            }
        }
        if pairs.is_empty() {
            return Err(Error::Profile(
                "no base has a power to deny; fully normal profiles are not supported".into(),
            ));
        }
        r_enum.sort_unstable();
        r_enum.dedup();
        let mut alphabets = HashMap::new();
        for &(s, n) in &pairs {
            let m_set = match &profile.entry(s).expect("pair base comes from the profile").m {
                MSet::Finite(set) => set.clone(),
                MSet::All { .. } => unreachable!("pairs only come from finite entries"),
            };
            alphabets.insert((s, n), Arc::new(build_phase_alphabet(s, &m_set, n, profile.c)?));
        }
        Ok(Self { profile: profile.clone(), pairs, r_enum, alphabets })
    }

    pub fn profile(&self) -> &NormalityProfile {
        &self.profile
    }

    /// Round-robin `(s_j, n_j)` over the eligible pairs.
    pub fn pair(&self, j: u64) -> (u64, u64) {
        self.pairs[(j % self.pairs.len() as u64) as usize]
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    /// `r_0 .. r_j`, saturating at the tracked list.
    pub fn r_list(&self, j: u64) -> &[u64] {
        let len = (j as usize).saturating_add(1).min(self.r_enum.len());
        &self.r_enum[..len]
    }

    pub fn p(&self, j: u64) -> u32 {
        least_p(self.r_list(j), j)
    }

    pub fn phase(&self, j: u64) -> Result<PhaseParams> {
        let (s, n) = self.pair(j);
        let m_set = match &self.profile.entry(s).expect("pair base comes from the profile").m {
            MSet::Finite(set) => set.clone(),
            MSet::All { .. } => return internal("pair drawn from an unbounded entry"),
        };
        let r_list = self.r_list(j).to_vec();
        let p = least_p(&r_list, j);
        let own: BTreeSet<u64> = m_set.iter().filter_map(|&m| s.checked_pow(m as u32)).collect();
        let mut bases = BTreeSet::new();
        for &r in &r_list {
            bases.insert(r);
            let rp = r
                .checked_pow(p)
                .filter(|&v| v <= u32::MAX as u64)
                .ok_or_else(|| Error::TooLarge(format!("{r}^{p} exceeds the supported digit range")))?;
            bases.insert(rp);
        }
        let transfer_bases = bases.difference(&own).copied().collect();
        Ok(PhaseParams {
            j,
            s,
            n,
            m_set,
            r_list,
            p,
            alphabet: self.alphabets[&(s, n)].clone(),
            transfer_bases,
        })
    }

    fn s_star(&self, j: u64) -> Radix {
        self.alphabets[&self.pair(j)].s_star
    }

    /// Block length `ℓ(j)` before doubling.
    pub fn ell_base(&self, j: u64) -> Result<u64> {
        let prev = self.s_star(j.saturating_sub(1));
        let cur = self.s_star(j);
        let jump = certified::ceil_log_sum(prev.root, prev.exp, cur.root, cur.exp)?;
        let growth = 2 * jump * (j + 2);
        // at least one symbol of s*_j fits in every window
        let mut ell = u64::try_from(certified_ceil(|p| certified::ln_power(cur.root, cur.exp, p))?)
            .map_err(|_| Error::TooLarge("block length exceeds u64".into()))?;
        for (k, &r) in self.r_list(j).iter().enumerate() {
            let bound = growth.max(3 * self.p(k as u64) as u64 * (j + 2));
            let factor = ratio::int(bound + 1);
            let need = certified_ceil(|p| Ok(certified::ln_power(r, 1, p)?.scale(&factor)))?;
            let need = u64::try_from(need).map_err(|_| Error::TooLarge("block length exceeds u64".into()))?;
            ell = ell.max(need);
        }
        Ok(ell)
    }

    /// `ℓ(j)` doubled `attempt` times.
    pub fn ell(&self, j: u64, attempt: u32) -> Result<u64> {
        self.ell_base(j)?
            .checked_shl(attempt)
            .filter(|v| v.leading_zeros() > 0)
            .ok_or_else(|| Error::TooLarge("block length overflow".into()))
    }
}

fn build_phase_alphabet(s: u64, m_set: &BTreeSet<u64>, n: u64, c: u64) -> Result<PhaseAlphabet> {
    let s32 = u32::try_from(s).map_err(|_| Error::Profile(format!("base {s} is too large")))?;
    let alphabet = balanced_alphabet(s32, m_set, n, c)?;
    let ell_u = alphabet.ell_u_small().ok_or_else(|| {
        Error::Profile(format!(
            "alphabet for base {s}, exponent {n} has block length {}, beyond the supported size",
            alphabet.ell_u()
        ))
    })?;
    let eps = alphabet
        .eps()
        .cloned()
        .ok_or_else(|| Error::Profile(format!("alphabet for base {s}, exponent {n} is too large")))?;
    let z = alphabet.z_block()?.into_digits();
    let z_tilde = alphabet.z_tilde_block()?.map(DigitBlock::into_digits);
    let s_star = Radix::new(s, ell_u as u64)?;
    let eta_lower = certified::eta_lower_bound(&s_star.value(), 64)?;
    Ok(PhaseAlphabet { alphabet, s_star, ell_u, z, z_tilde, eps, eta_lower })
}

/// Recursion variables after a stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageState {
    pub t: u64,
    pub j: u64,
    pub b: u64,
    pub x: SAdicNumber,
}

impl StageState {
    pub fn initial(schedule: &Schedule) -> Result<Self> {
        Ok(Self { t: 0, j: 0, b: 0, x: SAdicNumber::zero(schedule.s_star(0).value())? })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkDiscrepancy {
    pub m: u64,
    pub disc: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowDiscrepancy {
    pub r: u64,
    pub from: u64,
    pub to: u64,
    pub disc: String,
}

/// One line of the stage log. Rationals are `"p/q"` strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    pub t: u64,
    pub j_prev: u64,
    pub b_prev: u64,
    pub cond1: bool,
    pub cond2: bool,
    /// Frequency of `d` in the prefix, when the prefix has a chunk.
    pub prefix_freq: Option<String>,
    pub j: u64,
    pub s: u64,
    pub n: u64,
    pub a: u64,
    pub y: SAdicNumber,
    pub ell_attempt: u32,
    pub ell: u64,
    pub b: u64,
    pub symbols: u64,
    pub candidates: u64,
    pub block: String,
    pub block_freq: String,
    pub block_disc: Vec<ChunkDiscrepancy>,
    pub transfer_disc: Vec<WindowDiscrepancy>,
    /// Lower bound of `ln(s* − 2) / ln s*`.
    pub eta_lower: String,
    pub x: SAdicNumber,
}

/// Frequency of `d` among the chunks `(w; |d|)`, or `None` without chunks.
pub fn chunk_frequency(w: &DigitBlock, d: &DigitBlock) -> Option<BigRational> {
    let total = w.len() / d.len();
    (total > 0).then(|| ratio::frac(w.chunk_occurrences(d) as i64, total as i64))
}

/// Condition (1): moving to phase `j + 1` keeps every digit window short
/// relative to the position already reached.
pub fn position_condition(schedule: &Schedule, j: u64, b: u64) -> Result<bool> {
    let cur = schedule.phase(j)?;
    let next_star = schedule.s_star(j + 1);
    let jump = certified::ceil_log_sum(cur.s_star().root, cur.s_star().exp, next_star.root, next_star.exp)?;
    let reach = b + jump + schedule.ell(j + 1, 0)?;
    let own: BTreeSet<u64> = cur.m_set.iter().filter_map(|&m| cur.s.checked_pow(m as u32)).collect();
    for &r in schedule.r_list(j + 1) {
        if own.contains(&r) {
            continue;
        }
        let here = certified::nat_pos(b, r)?;
        let there = certified::nat_pos(reach, r)?;
        if (there - here) * (j + 1) >= here {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Condition (2): the prefix of `x` in base `s_j` already shows the bias.
pub fn bias_condition(params: &PhaseParams, x: &SAdicNumber, b: u64) -> Result<(bool, Option<BigRational>)> {
    let len = certified::nat_pos(b, params.s)?;
    let w = extract_digits(x, params.s as u32, 0, len)?;
    let freq = chunk_frequency(&w, params.d());
    let threshold = params.uniform_share() - params.eps() / ratio::int(2);
    Ok((freq.as_ref().is_some_and(|f| f < &threshold), freq))
}

/// Result of a successful block search.
#[derive(Clone, Debug)]
pub struct FoundBlock {
    pub w: DigitBlock,
    pub x_next: SAdicNumber,
    pub candidates: u64,
    pub freq: BigRational,
    pub block_disc: Vec<(u64, BigRational)>,
    pub transfer_disc: Vec<(u64, u64, u64, BigRational)>,
}

struct Evaluation {
    freq: BigRational,
    block_disc: Vec<(u64, BigRational)>,
    transfer_disc: Vec<(u64, u64, u64, BigRational)>,
    x_next: SAdicNumber,
}

fn evaluate(
    params: &PhaseParams,
    y: &SAdicNumber,
    symbols: u64,
    windows: &[(u64, u64, u64)],
    w: &DigitBlock,
) -> Result<Option<Evaluation>> {
    let tol = params.tolerance();
    let Some(freq) = chunk_frequency(w, params.d()) else {
        return Ok(None);
    };
    if freq >= params.uniform_share() - params.eps() {
        return Ok(None);
    }
    let mut block_disc = Vec::new();
    for &m in &params.m_set {
        let d = chunk_discrepancy(w, m as usize)?;
        if d >= tol {
            return Ok(None);
        }
        block_disc.push((m, d));
    }
    let x_next = y.extend(symbols, &digits_to_biguint(w.digits(), w.base()))?;
    let mut transfer_disc = Vec::new();
    for &(r, i0, i1) in windows {
        let u = extract_digits(&x_next, r as u32, i0, i1)?;
        let d = digit_discrepancy(&u)?;
        if d >= tol {
            return Ok(None);
        }
        transfer_disc.push((r, i0, i1, d));
    }
    Ok(Some(Evaluation { freq, block_disc, transfer_disc, x_next }))
}

/// Candidate stream for stage `t`, attempt `attempt`.
pub fn candidate_rng(seed: u64, t: u64, attempt: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t.wrapping_mul(1 << 8) | attempt as u64);
    rng
}

fn draw_candidate(rng: &mut ChaCha8Rng, params: &PhaseParams, symbols: u64) -> DigitBlock {
    let pa = &params.alphabet;
    let mut digits = Vec::with_capacity(symbols as usize * pa.ell_u);
    let mut sym = vec![0u32; pa.ell_u];
    for _ in 0..symbols {
        loop {
            sym.iter_mut().for_each(|d| *d = rng.gen_range(0..params.s as u32));
            let excluded = sym == pa.z || (pa.z_tilde.as_ref() == Some(&sym));
            if !excluded {
                break;
            }
        }
        digits.extend_from_slice(&sym);
    }
    DigitBlock::new_unchecked(params.s as u32, digits)
}

/// Searches the candidate stream for a block appended to `y` at nat
/// positions `(a, a + ell]` that meets conditions (ii)–(iv). The accepted
/// block is the lowest-index success, whatever the thread count.
pub fn find_block(
    params: &PhaseParams,
    a: u64,
    ell: u64,
    y: &SAdicNumber,
    rng: &mut ChaCha8Rng,
    budget: u64,
) -> Result<FoundBlock> {
    let star = params.s_star();
    let p0 = star.nat_pos(a)?;
    if y.prec() != p0 || y.base() != &star.value() {
        return internal(format!("start point has precision {} in the wrong base or position (want {p0})", y.prec()));
    }
    let symbols = star.nat_pos(a + ell)? - p0;
    if symbols == 0 {
        return internal("block window holds no symbol");
    }
    let mut windows = Vec::new();
    for &r in &params.transfer_bases {
        let (i0, i1) = (certified::nat_pos(a, r)?, certified::nat_pos(a + ell, r)?);
        if i0 == i1 {
            return internal(format!("empty digit window for base {r}"));
        }
        windows.push((r, i0, i1));
    }
    let mut drawn = 0u64;
    while drawn < budget {
        let batch: Vec<DigitBlock> = (0..BATCH.min((budget - drawn) as usize))
            .map(|_| draw_candidate(rng, params, symbols))
            .collect();
        let results: Vec<Result<Option<Evaluation>>> =
            batch.par_iter().map(|w| evaluate(params, y, symbols, &windows, w)).collect();
        for (i, (res, w)) in results.into_iter().zip(batch).enumerate() {
            if let Some(ev) = res? {
                return Ok(FoundBlock {
                    w,
                    x_next: ev.x_next,
                    candidates: drawn + i as u64 + 1,
                    freq: ev.freq,
                    block_disc: ev.block_disc,
                    transfer_disc: ev.transfer_disc,
                });
            }
        }
        drawn += BATCH as u64;
    }
    Err(Error::BudgetExhausted { budget })
}

/// Position `a` and start point `y` for a stage that moves from phase `j`
/// (state at position `b`) to phase `j + 1`.
pub fn advance_point(schedule: &Schedule, j: u64, b: u64, x: &SAdicNumber) -> Result<(u64, SAdicNumber)> {
    leftmost_tadic_subinterval(&x.interval(), schedule.s_star(j), b, schedule.s_star(j + 1))
}

/// Runs one stage.
pub fn step(schedule: &Schedule, state: &StageState, budget: u64) -> Result<(StageState, StageRecord)> {
    let cur = schedule.phase(state.j)?;
    let cond1 = position_condition(schedule, state.j, state.b)?;
    let (cond2, prefix_freq) = bias_condition(&cur, &state.x, state.b)?;
    let (j, a, y) = if cond1 && cond2 {
        let (a, y) = advance_point(schedule, state.j, state.b, &state.x)?;
        (state.j + 1, a, y)
    } else {
        (state.j, state.b, state.x.clone())
    };
    let params = if j == state.j { cur } else { schedule.phase(j)? };
    for attempt in 0..MAX_ATTEMPTS {
        let ell = schedule.ell(j, attempt)?;
        let mut rng = candidate_rng(schedule.profile().seed, state.t, attempt);
        match find_block(&params, a, ell, &y, &mut rng, budget) {
            Ok(found) => {
                let b = a + ell;
                let record = StageRecord {
                    t: state.t,
                    j_prev: state.j,
                    b_prev: state.b,
                    cond1,
                    cond2,
                    prefix_freq: prefix_freq.as_ref().map(ratio::to_text),
                    j,
                    s: params.s,
                    n: params.n,
                    a,
                    y: y.clone(),
                    ell_attempt: attempt,
                    ell,
                    b,
                    symbols: found.w.len() as u64 / params.alphabet.ell_u as u64,
                    candidates: found.candidates,
                    block: found.w.to_digit_string(),
                    block_freq: ratio::to_text(&found.freq),
                    block_disc: found
                        .block_disc
                        .iter()
                        .map(|(m, d)| ChunkDiscrepancy { m: *m, disc: ratio::to_text(d) })
                        .collect(),
                    transfer_disc: found
                        .transfer_disc
                        .iter()
                        .map(|(r, from, to, d)| WindowDiscrepancy { r: *r, from: *from, to: *to, disc: ratio::to_text(d) })
                        .collect(),
                    eta_lower: ratio::to_text(&params.alphabet.eta_lower),
                    x: found.x_next.clone(),
                };
                let next = StageState { t: state.t + 1, j, b, x: found.x_next };
                return Ok((next, record));
            }
            Err(Error::BudgetExhausted { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    internal(format!("stage {}: no block found after {MAX_ATTEMPTS} doublings of the block length", state.t))
}

/// Final point of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalPoint {
    pub x: SAdicNumber,
    pub b: u64,
}

/// Runs stages until `b >= until_b`, passing each record to `sink`.
pub fn run_with<F>(profile: &NormalityProfile, mut sink: F) -> Result<FinalPoint>
where
    F: FnMut(&StageRecord) -> Result<()>,
{
    let schedule = Schedule::new(profile)?;
    let mut state = StageState::initial(&schedule)?;
    while state.b < profile.until_b {
        let (next, record) = step(&schedule, &state, DEFAULT_BUDGET)?;
        sink(&record)?;
        state = next;
    }
    Ok(FinalPoint { x: state.x, b: state.b })
}

/// Runs the whole construction and keeps the log in memory.
pub fn run(profile: &NormalityProfile) -> Result<(FinalPoint, Vec<StageRecord>)> {
    let mut records = Vec::new();
    let fin = run_with(profile, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok((fin, records))
}

/// Serializes records as JSON lines.
pub fn to_jsonl(records: &[StageRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses a JSON-lines stage log.
pub fn parse_jsonl(text: &str) -> Result<Vec<StageRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("stage log line {}: {e}", i + 1))))
        .collect()
}
