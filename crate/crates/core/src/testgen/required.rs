//! Required test types: R = E ∪ A, with A extracted by a phrase lexicon.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::types::{RequiredTypes, TestType};

pub const LEXICON_VERSION: &str = "lexicon.v1";

/// Phrase → extracted test types. Phrases match whole words of the
/// normalized instruction (lowercase, punctuation folded to spaces).
pub const LEXICON: &[(&str, &[&str])] = &[
    ("error message", &[TestType::ERROR_HANDLING]),
    ("error messages", &[TestType::ERROR_HANDLING]),
    ("failed login", &[TestType::ERROR_HANDLING]),
    ("invalid credentials", &[TestType::ERROR_HANDLING]),
    ("invalid", &[TestType::ERROR_HANDLING]),
    ("signup", &[TestType::FIELD_VALIDATION, TestType::DATA_CONSISTENCY]),
    ("sign up", &[TestType::FIELD_VALIDATION, TestType::DATA_CONSISTENCY]),
    ("registration", &[TestType::FIELD_VALIDATION, TestType::DATA_CONSISTENCY]),
    ("register", &[TestType::FIELD_VALIDATION, TestType::DATA_CONSISTENCY]),
    ("onboarding", &[TestType::FIELD_VALIDATION, TestType::DATA_CONSISTENCY]),
    ("input fields", &[TestType::FIELD_VALIDATION]),
    ("format", &[TestType::FIELD_VALIDATION]),
    ("unique", &[TestType::DATA_CONSISTENCY]),
    ("duplicate", &[TestType::DATA_CONSISTENCY]),
    ("navigate", &[TestType::NAVIGATION]),
    ("navigation", &[TestType::NAVIGATION]),
    ("redirect", &[TestType::NAVIGATION]),
    ("login", &["authentication"]),
    ("log in", &["authentication"]),
    ("logging in", &["authentication"]),
    ("sign in", &["authentication"]),
    ("credentials", &["authentication"]),
    ("functional", &["functional"]),
    ("execution time", &["performance"]),
    ("response time", &["performance"]),
    ("performance", &["performance"]),
    ("secure", &["security"]),
    ("security", &["security"]),
    ("password strength", &["security"]),
];

/// Lowercase, every non-alphanumeric run folded to one space, padded so
/// that ` phrase ` finds whole-word matches.
fn normalize(text: &str) -> String {
    let mut out = String::from(" ");
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.ends_with(' ') {
            out.push(' ');
        }
    }
    if !out.ends_with(' ') {
        out.push(' ');
    }
    out
}

/// A: every lexicon label whose phrase occurs in the instruction.
pub fn extract_types(instruction: &str) -> BTreeSet<TestType> {
    let text = normalize(instruction);
    LEXICON
        .iter()
        .filter(|(phrase, _)| text.contains(&normalize(phrase)))
        .flat_map(|(_, labels)| labels.iter().map(|l| TestType::new(*l)))
        .collect()
}

pub fn derive_required_types(instruction: &str) -> RequiredTypes {
    derive_with_predefined(TestType::predefined(), instruction)
}

/// Same derivation over an arbitrary E.
pub fn derive_with_predefined(predefined: BTreeSet<TestType>, instruction: &str) -> RequiredTypes {
    let extracted = extract_types(instruction);
    let required = predefined.union(&extracted).cloned().collect();
    RequiredTypes { predefined, extracted, required }
}

/// "minimum of 10", "at least 10", "no fewer than 10".
pub fn minimum_cases(instruction: &str) -> Option<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:minimum of|at least|no fewer than)\s+(\d+)\b").expect("static regex")
    });
    re.captures(instruction)?.get(1)?.as_str().parse().ok()
}
