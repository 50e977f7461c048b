//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

// negated float comparisons in `check!` make NaN fail
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use simplenormal::alphabet::{balanced_alphabet, AlphabetU};
use simplenormal::analyzer::{
    check_append_bound, check_limit_bound, check_liminf_deficit, check_transfer, verify_stage_log, LemmaOutcome,
};
use simplenormal::block::{
    digit_discrepancy, estimate_low_discrepancy_fraction, inequivalent_block_pair, is_balanced, is_block_equivalent,
};
use simplenormal::certified::nat_pos;
use simplenormal::engine::{run, to_jsonl, Schedule};
use simplenormal::expsum::{leveque_bound, leveque_params, LevequeParams};
use simplenormal::radix::{extract_digits, leftmost_tadic_subinterval, sadic_subinterval, AdicInterval, Radix, SAdicNumber};
use simplenormal::ratio::{self, frac};
use simplenormal::residue::{
    euler_phi, haiman_difference, is_residue_equivalent, minimal_residue_sets, partition_count, PartitionSpec,
};

use common::{balanced_digits, block, random_digits, rng, toy_profile, transfer_instance, ExpBounds};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(took)
    }
}

fn haiman() -> Outcome {
    let start = Instant::now();
    for n in 1..=6u64 {
        for k in 1..=3u64 {
            let got = haiman_difference(n, k).map_err(|e| e.to_string())?;
            let want = BigInt::from(n.pow(k as u32 - 1) * euler_phi(n).map_err(|e| e.to_string())?);
            check!(got == want, "n={n} k={k}: {got} != {want}");
        }
    }
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!("18 pairs exact in {took:.2?}"))
}

fn partition_constants() -> Outcome {
    let count = |n, sigma, v, k| PartitionSpec::new(n, sigma, v, k).map(|p| partition_count(&p)).map_err(|e| e.to_string());
    check!(count(3, 6, 4, 2)? == BigUint::from(1u8), "P(3,6,4,2) != 1");
    for k in 1..=5u64 {
        check!(count(2, 1, 1, k)? == BigUint::from(k), "P(2,1,1,{k}) != {k}");
    }
    Ok("P(3,6,4,2)=1, P(2,1,1,k)=k for k<=5".into())
}

fn check_alphabet(u: &AlphabetU, ms: &BTreeSet<u64>, n: u64) -> Result<(), String> {
    let err = |e: simplenormal::Error| e.to_string();
    for &m in ms {
        check!(u.is_balanced_for(m).map_err(err)?, "not balanced for m={m}");
    }
    check!(!u.is_balanced_for(n).map_err(err)?, "balanced for n={n}");
    check!(u.is_even(u.z()), "z is not even");
    if let Some(zt) = u.z_tilde() {
        check!(!u.is_even(zt), "z~ is not odd");
        check!(u.cmp_arrangements(u.z(), zt).map_err(err)? == Ordering::Less, "z !< z~");
    }
    // independent route on the explicit blocks when they are small
    if u.ell_u_small().is_some_and(|l| l <= 1 << 20) {
        let mut blocks = vec![u.z_block().map_err(err)?];
        blocks.extend(u.z_tilde_block().map_err(err)?);
        for w in &blocks {
            for &m in ms {
                check!(is_balanced(w, m as usize).map_err(err)?, "materialized block unbalanced for m={m}");
            }
            check!(!is_balanced(w, n as usize).map_err(err)?, "materialized block balanced for n={n}");
        }
    }
    Ok(())
}

fn grid() -> Outcome {
    let start = Instant::now();
    let msets: Vec<BTreeSet<u64>> =
        [&[][..], &[1], &[1, 2], &[1, 3], &[1, 2, 3]].iter().map(|m| m.iter().copied().collect()).collect();
    let mut cases = Vec::new();
    for s in [2u32, 3, 5] {
        for ms in &msets {
            for n in 1..=4u64 {
                if ms.iter().all(|m| m % n != 0) {
                    cases.push((s, ms.clone(), n));
                }
            }
        }
    }
    let results: Vec<Result<(), String>> = cases
        .par_iter()
        .map(|(s, ms, n)| {
            let (s, n) = (*s, *n);
            let tag = format!("s={s} M={ms:?} n={n}");
            let single: BTreeSet<u64> = [n].into();
            if !ms.is_empty() {
                let (x, y) = minimal_residue_sets(ms, n).map_err(|e| format!("{tag}: {e}"))?;
                check!(is_residue_equivalent(&x, &y, ms).map_err(|e| e.to_string())?, "{tag}: X, Y not M-equivalent");
                check!(!is_residue_equivalent(&x, &y, &single).map_err(|e| e.to_string())?, "{tag}: X, Y n-equivalent");
            }
            let (u, v) = inequivalent_block_pair(s, ms, n).map_err(|e| format!("{tag}: {e}"))?;
            check!(is_block_equivalent(&u, &v, ms).map_err(|e| e.to_string())?, "{tag}: u, v not M-equivalent");
            check!(!is_block_equivalent(&u, &v, &single).map_err(|e| e.to_string())?, "{tag}: u, v n-equivalent");
            let alphabet = balanced_alphabet(s, ms, n, 1).map_err(|e| format!("{tag}: {e}"))?;
            check_alphabet(&alphabet, ms, n).map_err(|e| format!("{tag}: {e}"))
        })
        .collect();
    for r in results {
        r?;
    }
    let took = within(Duration::from_secs(60), start)?;
    Ok(format!("{} cases exact in {took:.2?}", cases.len()))
}

fn toy_construction() -> Outcome {
    let start = Instant::now();
    let profile = toy_profile(2000, 42);
    let (fin, records) = run(&profile).map_err(|e| e.to_string())?;
    let report = verify_stage_log(&records, &profile).map_err(|e| e.to_string())?;
    check!(report.ok(), "verification failed: {:?}", report.failure);
    let schedule = Schedule::new(&profile).map_err(|e| e.to_string())?;
    let mut fired = 0;
    let mut prev_x = SAdicNumber::zero(BigUint::from(2u8)).map_err(|e| e.to_string())?;
    for rec in &records {
        let tol = frac(1, rec.j as i64 + 1);
        for c in &rec.block_disc {
            check!(ratio::from_text(&c.disc).unwrap() < tol, "stage {}: block disc {} for m={}", rec.t, c.disc, c.m);
        }
        for w in &rec.transfer_disc {
            check!(ratio::from_text(&w.disc).unwrap() < tol, "stage {}: window disc {} for r={}", rec.t, w.disc, w.r);
        }
        if rec.cond2 {
            fired += 1;
            let params = schedule.phase(rec.j_prev).map_err(|e| e.to_string())?;
            let threshold = frac(1, 4) - params.eps() / ratio::int(2);
            let recorded = ratio::from_text(rec.prefix_freq.as_deref().ok_or("cond2 without prefix_freq")?).unwrap();
            check!(recorded < threshold, "stage {}: recorded frequency {} not below threshold", rec.t, ratio::to_text(&recorded));
            // recount over base-4 digits of the previous point
            let chunks = nat_pos(rec.b_prev, 2).unwrap() / 2;
            let w = extract_digits(&prev_x, 4, 0, chunks).map_err(|e| e.to_string())?;
            let d = params.d().value().to_u32().unwrap();
            let hits = w.digits().iter().filter(|&&x| x == d).count() as i64;
            check!(frac(hits, chunks as i64) == recorded, "stage {}: recount differs from the log", rec.t);
        }
        prev_x = rec.x.clone();
    }
    check!(fired > 0, "condition (2) never fired");
    let took = within(Duration::from_secs(600), start)?;
    Ok(format!(
        "{} stages to b={}, {} base-2 digits, condition (2) fired {fired} times, {took:.2?}",
        records.len(),
        fin.b,
        nat_pos(fin.b, 2).unwrap()
    ))
}

fn determinism() -> Outcome {
    let profile = toy_profile(2000, 42);
    let first = to_jsonl(&run(&profile).map_err(|e| e.to_string())?.1).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let second = pool.install(|| run(&profile).and_then(|(_, r)| to_jsonl(&r))).map_err(|e| e.to_string())?;
    check!(first == second, "stage logs differ");
    Ok(format!("{} bytes identical across thread counts", first.len()))
}

fn random_rational_pair(r: &mut ChaCha8Rng) -> (BigRational, BigRational) {
    let den: i64 = if r.gen_bool(0.3) { r.gen_range(1_000_000..1_000_000_000) } else { r.gen_range(2..1000) };
    let a = r.gen_range(0..den);
    let b = r.gen_range(a + 1..=den);
    (frac(a, den), frac(b, den))
}

fn random_radix(r: &mut ChaCha8Rng) -> Radix {
    let roots = [2u64, 3, 5, 6, 7, 10];
    let root = roots[r.gen_range(0..roots.len())];
    Radix::new(root, if r.gen_bool(0.2) { 2 } else { 1 }).unwrap()
}

fn subintervals() -> Outcome {
    let mut r = rng(6);
    for i in 0..1000 {
        let (lo, hi) = random_rational_pair(&mut r);
        let s = r.gen_range(2..=10u64);
        let iv = sadic_subinterval(&lo, &hi, s).map_err(|e| format!("instance {i}: {e}"))?;
        check!(iv.left() >= lo && iv.right() <= hi, "instance {i}: not contained");
        check!(iv.length() * ratio::int(2 * s as i64) >= &hi - &lo, "instance {i}: too short");
    }
    for i in 0..1000 {
        let (s, t) = (random_radix(&mut r), random_radix(&mut r));
        let b = r.gen_range(1..200u64);
        let prec = s.nat_pos(b).unwrap();
        let sv = s.value();
        let index = r.gen_range(0..1u64 << 62) % sv.pow(prec.min(60) as u32).min(BigUint::from(u64::MAX)).to_u64().unwrap();
        let iv = AdicInterval::new(sv.clone(), prec, BigUint::from(index)).unwrap();
        let (a, y) = leftmost_tadic_subinterval(&iv, s, b, t).map_err(|e| format!("instance {i}: {e}"))?;
        // a − b = ⌈ln(s t³)⌉, checked against certified powers of e
        let gap = a - b;
        let st3 = &sv * t.value().pow(3);
        check!(ExpBounds::new(gap).cmp(&st3) == Ordering::Less, "instance {i}: a too small");
        check!(ExpBounds::new(gap - 1).cmp(&st3) == Ordering::Greater, "instance {i}: a too large");
        check!(y.prec() == t.nat_pos(a).unwrap(), "instance {i}: wrong precision");
        let yi = y.interval();
        check!(yi.left() >= iv.left() && yi.right() <= iv.right(), "instance {i}: not contained");
        check!(&yi.left() - yi.length() < iv.left(), "instance {i}: not leftmost");
        for rr in 2..=20u64 {
            let grow = nat_pos(a, rr).unwrap() - nat_pos(b, rr).unwrap();
            check!(grow <= 2 * gap, "instance {i}: position growth {grow} > {} in base {rr}", 2 * gap);
        }
    }
    Ok("1000 + 1000 instances contained, length and growth bounds hold".into())
}

fn leveque() -> Outcome {
    check!(
        leveque_params(&frac(1, 1)).map_err(|e| e.to_string())? == LevequeParams { k: 2, gamma: frac(1, 2) },
        "leveque_params(1) != ({{1,2}}, 1/2)"
    );
    let mut r = rng(7);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..500 {
        let s = r.gen_range(2..=3u32);
        let len = r.gen_range(1..=64usize);
        let w = block(s, random_digits(&mut r, s, len));
        let prec = r.gen_range(0..40u64);
        let base = BigUint::from(s);
        let num = BigUint::from(r.gen::<u64>()) % base.pow(prec as u32);
        let x = SAdicNumber::new(base, prec, num).unwrap();
        let t_cap = r.gen_range(1..=200u64);
        let bound = leveque_bound(&w, &x, t_cap).map_err(|e| e.to_string())?;
        let d = ratio::to_f64(&digit_discrepancy(&w).unwrap());
        check!(d <= bound + 1e-9, "instance {i}: D = {d} > bound {bound}");
        worst = worst.max(d - bound);
    }
    Ok(format!("500 blocks, max D − bound = {worst:.3}; params(1) = ({{1,2}}, 1/2)"))
}

const LEMMA_INSTANCES: usize = 10_000;

/// Runs `gen` on successive seeds until `LEMMA_INSTANCES` instances meet
/// the premises.
fn property_suite<F>(name: &str, gen: F) -> Result<String, String>
where
    F: Fn(&mut ChaCha8Rng) -> simplenormal::Result<LemmaOutcome> + Sync,
{
    const CHUNK: u64 = 1024;
    let start = Instant::now();
    let mut held = 0;
    for chunk in 0..(4 * LEMMA_INSTANCES as u64 / CHUNK) {
        let outcomes: Vec<(u64, LemmaOutcome)> = (chunk * CHUNK..(chunk + 1) * CHUNK)
            .into_par_iter()
            .map(|seed| {
                let mut r = rng(seed ^ 0x5eed_0000);
                (seed, gen(&mut r).unwrap_or_else(|e| LemmaOutcome::Fails(format!("error: {e}"))))
            })
            .collect();
        for (seed, o) in outcomes {
            match o {
                LemmaOutcome::Holds => held += 1,
                LemmaOutcome::Fails(msg) => return Err(format!("{name}: seed {seed}: {msg}")),
                LemmaOutcome::PremiseFailure(_) => {}
            }
            if held == LEMMA_INSTANCES {
                return Ok(format!("{name} {held} ({:.2?})", start.elapsed()));
            }
        }
    }
    Err(format!("{name}: only {held} premise-satisfying instances"))
}

fn pick<T: Clone>(r: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[r.gen_range(0..xs.len())].clone()
}

fn transfer_case(r: &mut ChaCha8Rng) -> simplenormal::Result<LemmaOutcome> {
    let s = pick(r, &[2u32, 3, 5]);
    let (rr, p, eps) = pick(r, &[(2u64, 4u32, frac(1, 4)), (2, 3, frac(1, 3)), (3, 2, frac(1, 4)), (3, 2, frac(1, 3))]);
    let b = r.gen_range(40..200u64);
    let a = r.gen_range(0..b - 35);
    let (q, x) = transfer_instance(r, s, b);
    check_transfer(&q, &x, rr, p, a, b, &eps)
}

fn append_case(r: &mut ChaCha8Rng) -> simplenormal::Result<LemmaOutcome> {
    let s = r.gen_range(2..=6u32);
    let eps = pick(r, &[frac(1, 10), frac(1, 5), frac(1, 4), frac(1, 3)]);
    let len = r.gen_range(10..400usize);
    let mut w = balanced_digits(r, s, len);
    for _ in 0..r.gen_range(0..=len / 20) {
        let i = r.gen_range(0..len);
        w[i] = r.gen_range(0..s);
    }
    let max_u = (ratio::to_f64(&eps) * len as f64).ceil() as usize;
    let ulen = r.gen_range(1..=max_u.max(1));
    let u = if r.gen_bool(0.5) { vec![r.gen_range(0..s); ulen] } else { random_digits(r, s, ulen) };
    check_append_bound(&block(s, w), &block(s, u), &eps)
}

fn limit_case(r: &mut ChaCha8Rng) -> simplenormal::Result<LemmaOutcome> {
    let s = r.gen_range(2..=4u32);
    let (num, den) = pick(r, &[(1i64, 5i64), (1, 4), (1, 3)]);
    let eps = frac(num, den);
    let head = r.gen_range(s as usize * 4..60);
    let mut digits = vec![0u32; head];
    let mut cuts = vec![head as u64];
    let target = r.gen_range(200..1200usize);
    while digits.len() < target {
        let cap = digits.len() * num as usize / den as usize;
        let seg = if r.gen_bool(0.5) { cap } else { r.gen_range(1..=cap) };
        digits.extend(balanced_digits(r, s, seg));
        cuts.push(digits.len() as u64);
    }
    cuts.insert(0, r.gen_range(1..=head as u64 / 2));
    check_limit_bound(&block(s, digits), &cuts, &eps)
}

fn liminf_case(r: &mut ChaCha8Rng) -> simplenormal::Result<LemmaOutcome> {
    let base = r.gen_range(2..=4u32);
    let d = r.gen_range(0..base);
    let eps = pick(r, &[frac(1, 10), frac(1, 8), frac(1, 5)]);
    let head = r.gen_range(1..50usize);
    let mut digits = vec![d; head];
    let mut cuts = vec![head as u64];
    let limit = (2.0 * head as f64 / ratio::to_f64(&eps) * r.gen_range(1.0..2.0)) as usize + 1;
    let cap = frac(1, base as i64) - &eps;
    while digits.len() <= limit {
        let len = r.gen_range(5..60usize);
        // largest count with count/len < 1/r − eps
        let scaled = &cap * ratio::int(len as i64);
        let mut hits = scaled.floor().to_integer().to_usize().unwrap_or(0);
        if hits > 0 && ratio::int(hits as i64) >= scaled {
            hits -= 1;
        }
        let mut seg: Vec<u32> = (0..len).map(|i| if i < hits { d } else { (d + 1 + r.gen_range(0..base - 1)) % base }).collect();
        rand::seq::SliceRandom::shuffle(&mut seg[..], r);
        digits.extend(seg);
        cuts.push(digits.len() as u64);
    }
    check_liminf_deficit(&block(base, digits), &cuts, d, &eps)
}

fn lemma_suites() -> Outcome {
    let start = Instant::now();
    let parts = [
        property_suite("transfer", transfer_case)?,
        property_suite("append", append_case)?,
        property_suite("limit", limit_case)?,
        property_suite("liminf", liminf_case)?,
    ];
    Ok(format!("{} instances held, {:.2?}", parts.join(", "), start.elapsed()))
}

fn nat_pos_soundness() -> Outcome {
    let mut r = rng(9);
    let mut bs: Vec<u64> = (1..=300).collect();
    bs.extend((0..100).map(|_| r.gen_range(301..=100_000u64)));
    bs.push(100_000);
    let checked: Result<Vec<usize>, String> = bs
        .par_iter()
        .map(|&b| {
            let mut e = ExpBounds::new(b);
            for base in 2..=64u64 {
                let n = nat_pos(b, base).map_err(|e| e.to_string())?;
                let rb = BigUint::from(base);
                let hi = rb.pow(n as u32);
                check!(e.cmp(&hi) != Ordering::Less, "b={b} r={base}: r^{n} < e^b");
                check!(n > 0, "b={b} r={base}: position 0");
                let lo = hi / &rb;
                check!(e.cmp(&lo) == Ordering::Less, "b={b} r={base}: r^{} >= e^b", n - 1);
            }
            Ok(63)
        })
        .collect();
    let total: usize = checked?.iter().sum();
    Ok(format!("{total} (b, r) pairs, b up to 100000, zero violations"))
}

fn density() -> Outcome {
    let eps = frac(1, 10);
    let mut r = rng(10);
    let est = estimate_low_discrepancy_fraction(2, 256, &eps, 100_000, &mut r).map_err(|e| e.to_string())?;
    check!(est - 0.02 >= 0.9, "estimated fraction {est} minus tolerance is below 0.9");
    Ok(format!("estimated fraction {est:.5} (tolerance 0.02)"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("haiman identity", haiman),
        ("partition constants", partition_constants),
        ("residue/block/alphabet grid", grid),
        ("toy construction", toy_construction),
        ("determinism", determinism),
        ("adic subintervals", subintervals),
        ("leveque bound", leveque),
        ("lemma property suites", lemma_suites),
        ("nat_pos soundness", nat_pos_soundness),
        ("low-discrepancy density", density),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS  criterion {:>2}  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {:>2}  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
