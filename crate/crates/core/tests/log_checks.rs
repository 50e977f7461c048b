//! The stage-log verifier against tampered, truncated and mismatched logs.

mod common;

use simplenormal::analyzer::verify_stage_log;
use simplenormal::engine::{parse_jsonl, run, to_jsonl, StageRecord};
use simplenormal::Error;

fn toy_log() -> (simplenormal::profile::NormalityProfile, Vec<StageRecord>) {
    let profile = common::toy_profile(1200, 42);
    let (_, records) = run(&profile).unwrap();
    assert!(records.len() >= 3);
    (profile, records)
}

fn flip(c: char) -> char {
    if c == '0' { '1' } else { '0' }
}

#[test]
fn untouched_log_verifies() {
    let (profile, records) = toy_log();
    let report = verify_stage_log(&records, &profile).unwrap();
    assert!(report.ok(), "{:?}", report.failure);
    assert_eq!(report.stages, records.len() as u64);
}

#[test]
fn flipped_block_digit_names_its_stage() {
    let (profile, records) = toy_log();
    for t in 0..records.len() {
        for pos in [0, records[t].block.len() / 2, records[t].block.len() - 1] {
            let mut bad = records.clone();
            let mut chars: Vec<char> = bad[t].block.chars().collect();
            chars[pos] = flip(chars[pos]);
            bad[t].block = chars.into_iter().collect();
            let report = verify_stage_log(&bad, &profile).unwrap();
            let (stage, why) = report.failure.expect("tampering went unnoticed");
            assert_eq!(stage, t as u64, "{why}");
        }
    }
}

#[test]
fn altered_fields_are_caught() {
    let (profile, records) = toy_log();
    let mut bad = records.clone();
    bad[1].b += 1;
    assert_eq!(verify_stage_log(&bad, &profile).unwrap().failure.unwrap().0, 1);

    let mut bad = records.clone();
    bad[2].cond2 = !bad[2].cond2;
    assert_eq!(verify_stage_log(&bad, &profile).unwrap().failure.unwrap().0, 2);

    let mut bad = records.clone();
    bad[0].block_disc[0].disc = "0/1".into();
    assert_eq!(verify_stage_log(&bad, &profile).unwrap().failure.unwrap().0, 0);
}

#[test]
fn incomplete_log_fails() {
    let (profile, mut records) = toy_log();
    records.pop();
    assert!(!verify_stage_log(&records, &profile).unwrap().ok());
}

#[test]
fn log_checked_against_profile_not_seed() {
    let (_, records) = toy_log();
    // stages are checked by their conditions, so the seed does not matter
    assert!(verify_stage_log(&records, &common::toy_profile(1200, 43)).unwrap().ok());
    // the log runs past an earlier stopping point
    assert!(!verify_stage_log(&records, &common::toy_profile(300, 42)).unwrap().ok());
    let two_bases = simplenormal::profile::validate_profile(
        r#"{"entries":[{"s":2,"M":[1]},{"s":3,"M":[1]}],"n_max":2,"seed":42,"until_b":1200}"#,
    )
    .unwrap();
    assert!(!verify_stage_log(&records, &two_bases).unwrap().ok());
}

#[test]
fn truncated_file_is_a_parse_error() {
    let (_, records) = toy_log();
    let text = to_jsonl(&records).unwrap();
    let cut = &text[..text.len() - 40];
    match parse_jsonl(cut) {
        Err(Error::Parse(msg)) => assert!(msg.contains(&records.len().to_string()), "{msg}"),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(parse_jsonl("{\"t\":0,\"bogus\":1}\n"), Err(Error::Parse(_))));
    assert_eq!(parse_jsonl(&text).unwrap(), records);
}
