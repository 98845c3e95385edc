//! Seeded value synthesis per constraint kind and scenario.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::check::{check, effective_min_length};
use super::{ConstraintKind, DataError, FieldConstraint, Rule, Scenario};
use crate::canonical::sha256_hex;

const FIRST_NAMES: &[&str] = &["Amelia", "Noah", "Priya", "Mateo", "Chloe", "Kenji", "Fatima", "Lucas", "Ingrid", "Omar"];
const LAST_NAMES: &[&str] = &["Turner", "Okafor", "Larsen", "Moreau", "Tanaka", "Silva", "Novak", "Haddad", "Walsh", "Reyes"];
const UNICODE_NAMES: &[&str] = &["Zoë Ångström", "José Núñez", "Søren Kierkegård", "Chloé Dubois-Lefèvre", "Łukasz Żółć"];
const WORDS: &[&str] = &["amber", "falcon", "river", "quartz", "maple", "comet", "harbor", "cedar", "nova", "pixel"];
const DOMAINS: &[&str] = &["example", "mailbox", "testmail", "inbox"];
const TLDS: &[&str] = &["com", "org", "net"];
const LOWER: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
const UPPER: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const DIGITS: &[u8] = b"0123456789";
const SYMBOLS: &[u8] = b"!#$%&*+-=?@^_";
const ATTEMPTS: usize = 256;
const REGEX_MAX_REPEAT: u32 = 12;
/// Length used for the max-length edge case when the field declares none.
const UNBOUNDED_EDGE_LENGTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synthesized {
    pub value: String,
    /// The rule the value breaks, when it breaks one.
    pub violated: Option<Rule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeCase {
    Empty,
    MaxLength,
    UnicodeName,
}

/// Stable per-slot seed derived from the run seed.
pub fn derive_seed(seed: u64, case_id: &str, slot: &str) -> u64 {
    let digest = sha256_hex(format!("{seed}/{case_id}/{slot}"));
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

fn pick(rng: &mut ChaCha8Rng, items: &[&'static str]) -> &'static str {
    items.choose(rng).copied().expect("non-empty list")
}

fn random_from(rng: &mut ChaCha8Rng, alphabet: &[u8], len: usize) -> String {
    (0..len)
        .map(|_| *alphabet.choose(rng).expect("non-empty alphabet") as char)
        .collect()
}

/// Password of exactly `len` characters drawing from `classes` classes
/// (each used at least once while `len` allows).
fn class_string(rng: &mut ChaCha8Rng, len: usize, classes: usize) -> String {
    let pools: Vec<&[u8]> = [UPPER, LOWER, DIGITS, SYMBOLS].into_iter().take(classes.clamp(1, 4)).collect();
    let mut chars: Vec<char> = pools
        .iter()
        .take(len)
        .map(|pool| *pool.choose(rng).unwrap() as char)
        .collect();
    let all: Vec<u8> = pools.concat();
    while chars.len() < len {
        chars.push(*all.choose(rng).unwrap() as char);
    }
    chars.shuffle(rng);
    chars.into_iter().collect()
}

fn grammar(constraint: &FieldConstraint, rng: &mut ChaCha8Rng) -> String {
    match constraint.kind {
        ConstraintKind::Email => format!(
            "{}.{}{}@{}.{}",
            pick(rng, FIRST_NAMES).to_lowercase(),
            pick(rng, LAST_NAMES).to_lowercase(),
            rng.random_range(1..100),
            pick(rng, DOMAINS),
            pick(rng, TLDS)
        ),
        ConstraintKind::Phone => {
            let first = rng.random_range(2..10).to_string();
            first + &random_from(rng, DIGITS, 9)
        }
        ConstraintKind::Password => {
            let classes = constraint.strength.map_or(3, |s| s.min_classes.max(3));
            let len = rng.random_range(12..16);
            class_string(rng, len, classes)
        }
        ConstraintKind::Name => format!("{} {}", pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES)),
        ConstraintKind::Text => format!("{}_{}{}", pick(rng, WORDS), pick(rng, WORDS), rng.random_range(10..100)),
        ConstraintKind::Choice => constraint
            .options
            .choose(rng)
            .cloned()
            .unwrap_or_default(),
    }
}

/// A value of exactly `len` characters in the kind's own shape where the
/// shape allows that length.
fn resize(constraint: &FieldConstraint, rng: &mut ChaCha8Rng, len: usize) -> String {
    match constraint.kind {
        ConstraintKind::Email => {
            let domain = format!("{}.com", pick(rng, DOMAINS));
            let local = len.saturating_sub(domain.len() + 1).max(1);
            format!("{}@{domain}", random_from(rng, LOWER, local))
        }
        ConstraintKind::Phone => random_from(rng, DIGITS, len),
        ConstraintKind::Password => {
            let classes = constraint.strength.map_or(3, |s| s.min_classes.max(3));
            class_string(rng, len, classes)
        }
        ConstraintKind::Name => {
            let first = pick(rng, FIRST_NAMES);
            if len <= first.len() + 1 {
                let mut name: String = first.chars().take(len.max(1)).collect();
                while name.len() < len {
                    name.push('a');
                }
                name
            } else {
                let rest = len - first.len() - 1;
                let mut last = pick(rng, LAST_NAMES).to_string();
                while last.len() < rest {
                    last.push(*LOWER.choose(rng).unwrap() as char);
                }
                last.truncate(rest);
                format!("{first} {last}")
            }
        }
        ConstraintKind::Text => random_from(rng, LOWER, len),
        ConstraintKind::Choice => grammar(constraint, rng),
    }
}

fn regex_sample(generator: &rand_regex::Regex, rng: &mut ChaCha8Rng) -> Option<String> {
    let sampled: Result<String, _> = rng.sample(generator);
    sampled.ok()
}

fn valid_value(constraint: &FieldConstraint, rng: &mut ChaCha8Rng) -> Result<String, DataError> {
    let min = effective_min_length(constraint);
    let generator = constraint
        .pattern
        .as_deref()
        .and_then(|p| rand_regex::Regex::compile(p, REGEX_MAX_REPEAT).ok());
    for attempt in 0..ATTEMPTS {
        let mut candidate = match &generator {
            Some(generator) if attempt % 2 == 1 => match regex_sample(generator, rng) {
                Some(v) => v,
                None => continue,
            },
            _ => grammar(constraint, rng),
        };
        let len = candidate.chars().count();
        if min.is_some_and(|m| len < m) || constraint.max_length.is_some_and(|m| len > m) {
            let low = min.unwrap_or(1).max(1);
            let high = constraint.max_length.unwrap_or(low + 8).max(low);
            let target = rng.random_range(low..=high.min(low + 8));
            candidate = resize(constraint, rng, target);
        }
        if check(constraint, &candidate).is_empty() && !candidate.is_empty() {
            return Ok(candidate);
        }
    }
    Err(DataError::UnsatisfiableConstraint(format!(
        "no {:?} value satisfies pattern {:?} within length {:?}..{:?}",
        constraint.kind, constraint.pattern, min, constraint.max_length
    )))
}

fn invalid_candidate(
    constraint: &FieldConstraint,
    rule: Rule,
    rng: &mut ChaCha8Rng,
    valid: &str,
) -> Option<String> {
    match rule {
        Rule::Required => constraint.required.then(String::new),
        Rule::Format => match constraint.kind {
            ConstraintKind::Email => Some(valid.replacen('@', "#", 1)),
            ConstraintKind::Phone => {
                let mut chars: Vec<char> = valid.chars().collect();
                let at = rng.random_range(1..chars.len().max(2)).min(chars.len() - 1);
                chars[at] = 'x';
                Some(chars.into_iter().collect())
            }
            ConstraintKind::Name => {
                let mut chars: Vec<char> = valid.chars().collect();
                let last = chars.len() - 1;
                chars[last] = '7';
                Some(chars.into_iter().collect())
            }
            ConstraintKind::Choice => Some(format!("not-{}", valid)),
            ConstraintKind::Password | ConstraintKind::Text => None,
        },
        Rule::Pattern => {
            constraint.pattern.as_ref()?;
            let mut candidate = if rng.random_bool(0.5) {
                grammar(constraint, rng)
            } else {
                let mut v = valid.to_string();
                v.push(*[LOWER, DIGITS].choose(rng).unwrap().choose(rng).unwrap() as char);
                v
            };
            if constraint.max_length.is_some_and(|m| candidate.chars().count() > m) {
                candidate = candidate.chars().take(constraint.max_length.unwrap()).collect();
            }
            Some(candidate)
        }
        Rule::MinLength => {
            let min = effective_min_length(constraint)?;
            (min >= 2).then(|| resize(constraint, rng, min - 1))
        }
        Rule::MaxLength => constraint.max_length.map(|max| resize(constraint, rng, max + 1)),
        Rule::Classes => {
            let strength = constraint.strength?;
            if strength.min_classes < 2 {
                return None;
            }
            let low = effective_min_length(constraint).unwrap_or(1).max(1);
            let len = constraint.max_length.map_or(low + 4, |m| m.min(low + 4)).max(low);
            Some(class_string(rng, len, strength.min_classes - 1))
        }
    }
}

fn default_invalid_order(kind: ConstraintKind) -> &'static [Rule] {
    match kind {
        ConstraintKind::Password => &[Rule::MinLength, Rule::Classes, Rule::MaxLength, Rule::Pattern, Rule::Required],
        ConstraintKind::Text => &[Rule::Pattern, Rule::MinLength, Rule::MaxLength, Rule::Required],
        _ => &[Rule::Format, Rule::Pattern, Rule::MinLength, Rule::MaxLength, Rule::Required],
    }
}

fn invalid_value(
    constraint: &FieldConstraint,
    rule: Option<Rule>,
    rng: &mut ChaCha8Rng,
) -> Result<Synthesized, DataError> {
    let valid = valid_value(constraint, rng)?;
    let rules: Vec<Rule> = match rule {
        Some(rule) => vec![rule],
        None => default_invalid_order(constraint.kind).to_vec(),
    };
    for rule in &rules {
        for _ in 0..ATTEMPTS / 4 {
            let Some(candidate) = invalid_candidate(constraint, *rule, rng, &valid) else {
                break;
            };
            if check(constraint, &candidate) == [*rule] {
                return Ok(Synthesized { value: candidate, violated: Some(*rule) });
            }
        }
    }
    Err(DataError::UnsatisfiableConstraint(match rule {
        Some(rule) => format!("cannot violate only `{rule}` for a {:?} field", constraint.kind),
        None => format!("no single rule of a {:?} field can be violated alone", constraint.kind),
    }))
}

/// Deterministic in `(constraint, scenario, seed)`. Valid values satisfy
/// every rule; invalid ones break exactly one, which is reported. Paired
/// scenarios are synthesized as plain valid values here; use
/// [`synthesize_pair`] to relate two slots.
pub fn synthesize_value(constraint: &FieldConstraint, scenario: &Scenario, seed: u64) -> Result<Synthesized, DataError> {
    constraint.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match scenario {
        Scenario::Valid | Scenario::Match(_) | Scenario::Mismatch(_) => Ok(Synthesized {
            value: valid_value(constraint, &mut rng)?,
            violated: None,
        }),
        Scenario::Invalid(rule) => invalid_value(constraint, *rule, &mut rng),
        Scenario::Empty => edge_case(constraint, EdgeCase::Empty, seed),
        Scenario::MaxLength => edge_case(constraint, EdgeCase::MaxLength, seed),
        Scenario::UnicodeName => edge_case(constraint, EdgeCase::UnicodeName, seed),
    }
}

/// Named edge cases; `violated` reports the first rule the value breaks.
pub fn edge_case(constraint: &FieldConstraint, which: EdgeCase, seed: u64) -> Result<Synthesized, DataError> {
    constraint.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value = match which {
        EdgeCase::Empty => String::new(),
        EdgeCase::MaxLength => {
            let len = constraint.max_length.unwrap_or(UNBOUNDED_EDGE_LENGTH);
            resize(constraint, &mut rng, len)
        }
        EdgeCase::UnicodeName => pick(&mut rng, UNICODE_NAMES).to_string(),
    };
    let violated = check(constraint, &value).first().copied();
    Ok(Synthesized { value, violated })
}

/// Two valid values for linked fields (password and its confirmation):
/// equal when `mismatch` is false, different otherwise.
pub fn synthesize_pair(constraint: &FieldConstraint, mismatch: bool, seed: u64) -> Result<(String, String), DataError> {
    constraint.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = valid_value(constraint, &mut rng)?;
    if !mismatch {
        return Ok((first.clone(), first));
    }
    for _ in 0..ATTEMPTS {
        let second = valid_value(constraint, &mut rng)?;
        if second != first {
            return Ok((first, second));
        }
    }
    Err(DataError::UnsatisfiableConstraint("only one valid value exists".into()))
}
