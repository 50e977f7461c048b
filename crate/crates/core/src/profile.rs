//! Normality profiles: which powers of which bases the constructed number
//! must be simply normal to.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents `m` for which the number must be simply normal to `s^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MSet {
    /// A finite divisor-closed set; every other exponent must fail.
    Finite(BTreeSet<u64>),
    /// Every exponent; only `1..=m_max` is tracked.
    All { m_max: u64 },
}

impl MSet {
    pub fn contains(&self, m: u64) -> bool {
        match self {
            MSet::Finite(set) => set.contains(&m),
            MSet::All { .. } => m >= 1,
        }
    }

    /// Exponents whose powers are tracked by the construction.
    pub fn tracked(&self) -> Vec<u64> {
        match self {
            MSet::Finite(set) => set.iter().copied().collect(),
            MSet::All { m_max } => (1..=*m_max).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileEntry {
    pub s: u64,
    pub m: MSet,
}

/// A validated profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalityProfile {
    entries: Vec<ProfileEntry>,
    pub n_max: u64,
    pub c: u64,
    pub seed: u64,
    pub until_b: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawM {
    List(Vec<u64>),
    Marker(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    s: u64,
    #[serde(rename = "M")]
    m: RawM,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    m_max: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    entries: Vec<RawEntry>,
    n_max: u64,
    #[serde(default = "default_c")]
    c: u64,
    seed: u64,
    until_b: u64,
}

fn default_c() -> u64 {
    1
}

fn reject<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Profile(msg.into()))
}

/// `(root, k)` with `s = root^k` and `k` maximal.
pub fn perfect_power(s: u64) -> (u64, u32) {
    let mut best = (s, 1);
    for k in 2..64u32 {
        let r = (s as f64).powf(1.0 / k as f64).round() as u64;
        if r < 2 {
            break;
        }
        for cand in r.saturating_sub(1)..=r + 1 {
            if cand >= 2 && cand.checked_pow(k) == Some(s) {
                best = (cand, k);
            }
        }
    }
    best
}

fn superscript(k: u32) -> String {
    const SUP: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    k.to_string().chars().map(|c| SUP[c.to_digit(10).unwrap_or(0) as usize]).collect()
}

impl NormalityProfile {
    /// Parses and validates a profile document.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawProfile = serde_json::from_str(text).map_err(|e| Error::Profile(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawProfile) -> Result<Self> {
        if raw.entries.is_empty() {
            return reject("entry list is empty");
        }
        if raw.n_max < 1 {
            return reject("n_max must be at least 1");
        }
        if raw.c < 1 {
            return reject("c must be at least 1");
        }
        if raw.until_b < 1 {
            return reject("until_b must be at least 1");
        }
        let mut entries: Vec<ProfileEntry> = Vec::new();
        for e in raw.entries {
            if e.s < 2 {
                return reject(format!("base {} is below 2", e.s));
            }
            let (root, k) = perfect_power(e.s);
            if k > 1 {
                return reject(format!("{} = {root}{}, not in the set of non-perfect-power bases", e.s, superscript(k)));
            }
            if entries.iter().any(|x| x.s == e.s) {
                return reject(format!("base {} listed twice", e.s));
            }
            let m = match (e.m, e.m_max) {
                (RawM::Marker(t), Some(m_max)) if t == "all" => {
                    if m_max < 1 {
                        return reject("m_max must be at least 1");
                    }
                    MSet::All { m_max }
                }
                (RawM::Marker(t), None) if t == "all" => {
                    return reject(format!("base {}: \"all\" needs m_max", e.s));
                }
                (RawM::Marker(t), _) => return reject(format!("base {}: unknown marker {t:?}", e.s)),
                (RawM::List(_), Some(_)) => return reject(format!("base {}: m_max only applies to \"all\"", e.s)),
                (RawM::List(list), None) => {
                    let set: BTreeSet<u64> = list.into_iter().collect();
                    if set.contains(&0) {
                        return reject(format!("base {}: exponent 0 is not allowed", e.s));
                    }
                    for &m in &set {
                        if let Some(d) = (1..m).find(|d| m % d == 0 && !set.contains(d)) {
                            return reject(format!("base {}: divisor {d} of {m} missing", e.s));
                        }
                    }
                    if (1..=raw.n_max).all(|n| set.contains(&n)) {
                        return reject(format!(
                            "base {}: every n <= n_max = {} is in M, so no power is left to deny",
                            e.s, raw.n_max
                        ));
                    }
                    MSet::Finite(set)
                }
            };
            entries.push(ProfileEntry { s: e.s, m });
        }
        entries.sort_by_key(|e| e.s);
        Ok(Self { entries, n_max: raw.n_max, c: raw.c, seed: raw.seed, until_b: raw.until_b })
    }

    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    pub fn entry(&self, s: u64) -> Option<&ProfileEntry> {
        self.entries.iter().find(|e| e.s == s)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Canonical JSON form (entries sorted by base).
    pub fn to_json(&self) -> Result<String> {
        let raw = RawProfile {
            entries: self
                .entries
                .iter()
                .map(|e| match &e.m {
                    MSet::Finite(set) => RawEntry { s: e.s, m: RawM::List(set.iter().copied().collect()), m_max: None },
                    MSet::All { m_max } => RawEntry { s: e.s, m: RawM::Marker("all".into()), m_max: Some(*m_max) },
                })
                .collect(),
            n_max: self.n_max,
            c: self.c,
            seed: self.seed,
            until_b: self.until_b,
        };
        Ok(serde_json::to_string(&raw)?)
    }
}

/// Parses and validates a profile document.
pub fn validate_profile(text: &str) -> Result<NormalityProfile> {
    NormalityProfile::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(entries: &str, n_max: u64) -> String {
        format!(r#"{{"entries":{entries},"n_max":{n_max},"c":1,"seed":42,"until_b":100}}"#)
    }

    fn message(r: Result<NormalityProfile>) -> String {
        match r {
            Err(Error::Profile(m)) => m,
            other => panic!("expected a profile error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_perfect_powers() {
        let m = message(validate_profile(&doc(r#"[{"s":4,"M":[1]}]"#, 2)));
        assert!(m.contains("4 = 2²"), "{m}");
        let m = message(validate_profile(&doc(r#"[{"s":8,"M":[1]}]"#, 2)));
        assert!(m.contains("8 = 2³"), "{m}");
        let m = message(validate_profile(&doc(r#"[{"s":9,"M":[1]}]"#, 2)));
        assert!(m.contains("9 = 3²"), "{m}");
    }

    #[test]
    fn rejects_missing_divisors() {
        let m = message(validate_profile(&doc(r#"[{"s":2,"M":[2]}]"#, 3)));
        assert!(m.contains("divisor 1 of 2 missing"), "{m}");
    }

    #[test]
    fn accepts_valid_profiles() {
        let p = validate_profile(&doc(r#"[{"s":2,"M":[1,2]}]"#, 4)).unwrap();
        assert_eq!(p.entries()[0].m, MSet::Finite([1, 2].into_iter().collect()));
        let p = validate_profile(&doc(r#"[{"s":3,"M":"all","m_max":2},{"s":2,"M":[1]}]"#, 3)).unwrap();
        assert_eq!(p.entries()[0].s, 2);
        assert_eq!(p.entries()[1].m, MSet::All { m_max: 2 });
        let again = validate_profile(&p.to_json().unwrap()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn rejects_structural_problems() {
        assert!(validate_profile(&doc("[]", 2)).is_err());
        assert!(validate_profile(&doc(r#"[{"s":2,"M":[1]}]"#, 0)).is_err());
        assert!(validate_profile(&doc(r#"[{"s":2,"M":[1,2]}]"#, 2)).is_err());
        assert!(validate_profile(&doc(r#"[{"s":3,"M":"all"}]"#, 2)).is_err());
        assert!(validate_profile(&doc(r#"[{"s":2,"M":[1]},{"s":2,"M":[1]}]"#, 2)).is_err());
        assert!(validate_profile("{").is_err());
    }

    #[test]
    fn perfect_power_detection() {
        assert_eq!(perfect_power(2), (2, 1));
        assert_eq!(perfect_power(6), (6, 1));
        assert_eq!(perfect_power(64), (2, 6));
        assert_eq!(perfect_power(1000), (10, 3));
        assert_eq!(perfect_power(3u64.pow(40)), (3, 40));
    }
}
