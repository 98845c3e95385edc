//! Independent constraint checker. Kept free of any generator logic so it
//! can serve as the oracle for synthesized values.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{ConstraintKind, FieldConstraint, Rule};

pub const EMAIL_FORMAT: &str = r"^[^@\s]+@[^@\s]+\.[^@\s]+$";
pub const PHONE_FORMAT: &str = r"^\+?[0-9]{7,15}$";
const NAME_FORMAT: &str = r"^\p{L}[\p{L} '.\-]*$";

fn compiled(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("built-in format compiles"))
}

fn format_ok(constraint: &FieldConstraint, value: &str) -> bool {
    static EMAIL: OnceLock<Regex> = OnceLock::new();
    static PHONE: OnceLock<Regex> = OnceLock::new();
    static NAME: OnceLock<Regex> = OnceLock::new();
    match constraint.kind {
        ConstraintKind::Email => compiled(&EMAIL, EMAIL_FORMAT).is_match(value),
        ConstraintKind::Phone => compiled(&PHONE, PHONE_FORMAT).is_match(value),
        ConstraintKind::Name => compiled(&NAME, NAME_FORMAT).is_match(value),
        ConstraintKind::Choice => constraint.options.iter().any(|o| o == value),
        ConstraintKind::Password | ConstraintKind::Text => true,
    }
}

thread_local! {
    static ANCHORED: RefCell<HashMap<String, Option<Regex>>> = RefCell::new(HashMap::new());
}

/// HTML semantics: the pattern must match the whole value. An invalid
/// pattern matches nothing.
fn anchored_match(pattern: &str, value: &str) -> bool {
    ANCHORED.with(|cache| {
        cache
            .borrow_mut()
            .entry(pattern.to_string())
            .or_insert_with(|| Regex::new(&format!("^(?:{pattern})$")).ok())
            .as_ref()
            .is_some_and(|re| re.is_match(value))
    })
}

fn character_classes(value: &str) -> usize {
    let lower = value.chars().any(|c| c.is_lowercase());
    let upper = value.chars().any(|c| c.is_uppercase());
    let digit = value.chars().any(|c| c.is_ascii_digit());
    let other = value.chars().any(|c| !c.is_alphanumeric());
    [lower, upper, digit, other].into_iter().filter(|b| *b).count()
}

/// The larger of the declared minimum and the strength minimum.
pub fn effective_min_length(constraint: &FieldConstraint) -> Option<usize> {
    match (constraint.min_length, constraint.strength.map(|s| s.min_length)) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

/// Every rule `value` violates, in [`Rule::ALL`] order. An empty value
/// violates `Required` when the field is required and nothing otherwise.
pub fn check(constraint: &FieldConstraint, value: &str) -> Vec<Rule> {
    if value.is_empty() {
        return if constraint.required { vec![Rule::Required] } else { Vec::new() };
    }
    let mut violations = Vec::new();
    if !format_ok(constraint, value) {
        violations.push(Rule::Format);
    }
    if let Some(pattern) = &constraint.pattern {
        if !anchored_match(pattern, value) {
            violations.push(Rule::Pattern);
        }
    }
    let length = value.chars().count();
    if effective_min_length(constraint).is_some_and(|min| length < min) {
        violations.push(Rule::MinLength);
    }
    if constraint.max_length.is_some_and(|max| length > max) {
        violations.push(Rule::MaxLength);
    }
    if constraint
        .strength
        .is_some_and(|s| character_classes(value) < s.min_classes)
    {
        violations.push(Rule::Classes);
    }
    violations
}
