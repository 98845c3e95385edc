//! Phase 4, part one: bind data slots from a dataset or synthesize values.

mod check;
mod mapping;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::site::{ElementDigest, PageEntry, PageType};
pub use check::{check, effective_min_length, EMAIL_FORMAT, PHONE_FORMAT};
pub use mapping::{bind_suite, map_provided_data, normalize_name, BindingSet, Dataset};
pub use synth::{derive_seed, edge_case, synthesize_pair, synthesize_value, EdgeCase, Synthesized};

/// Default password policy where the page states none (a documented
/// assumption, not an observed requirement).
pub const DEFAULT_PASSWORD_MIN_LENGTH: usize = 8;
pub const DEFAULT_PASSWORD_MIN_CLASSES: usize = 3;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DataError {
    #[error("constraint cannot be satisfied: {0}")]
    UnsatisfiableConstraint(String),
    #[error("no dataset column for slots: {}", unresolved.join(", "))]
    UnmappableSlot {
        unresolved: Vec<String>,
        mapped: Vec<DataBinding>,
    },
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("case {case}: {reason}")]
    Binding { case: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Email,
    Phone,
    Password,
    Text,
    Name,
    Choice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrengthRules {
    pub min_length: usize,
    /// Distinct classes among lowercase, uppercase, digit, other.
    pub min_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConstraint {
    pub kind: ConstraintKind,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<StrengthRules>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

impl FieldConstraint {
    pub fn new(kind: ConstraintKind) -> Self {
        let strength = (kind == ConstraintKind::Password).then_some(StrengthRules {
            min_length: DEFAULT_PASSWORD_MIN_LENGTH,
            min_classes: DEFAULT_PASSWORD_MIN_CLASSES,
        });
        Self {
            kind,
            required: false,
            pattern: None,
            min_length: None,
            max_length: None,
            strength,
            options: Vec::new(),
        }
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    /// Pattern compiles, bounds are ordered, choices have options.
    pub fn validate(&self) -> Result<(), DataError> {
        if let Some(pattern) = &self.pattern {
            regex::Regex::new(&format!("^(?:{pattern})$"))
                .map_err(|e| DataError::InvalidConstraint(format!("pattern `{pattern}`: {e}")))?;
        }
        if let (Some(min), Some(max)) = (effective_min_length(self), self.max_length) {
            if min > max {
                return Err(DataError::InvalidConstraint(format!("min length {min} > max length {max}")));
            }
        }
        if let Some(s) = self.strength {
            if s.min_classes > 4 {
                return Err(DataError::InvalidConstraint("at most 4 character classes exist".into()));
            }
        }
        if self.kind == ConstraintKind::Choice && self.options.is_empty() {
            return Err(DataError::InvalidConstraint("choice without options".into()));
        }
        Ok(())
    }

    /// Derives the constraint of a form field from its digest; `page`
    /// supplies option children for selects.
    pub fn for_element(element: &ElementDigest, page: Option<&PageEntry>) -> Self {
        let descriptor = ["name", "id", "placeholder", "aria-label", "autocomplete"]
            .iter()
            .filter_map(|a| element.attr(a))
            .collect::<Vec<_>>()
            .join(" ")
            .to_ascii_lowercase();
        let field_kind = element.field_kind().unwrap_or_default();
        let has = |words: &[&str]| words.iter().any(|w| descriptor.contains(w));
        let kind = match field_kind.as_str() {
            "email" => ConstraintKind::Email,
            "tel" => ConstraintKind::Phone,
            "password" => ConstraintKind::Password,
            "select" => ConstraintKind::Choice,
            _ if has(&["email", "e-mail"]) => ConstraintKind::Email,
            _ if has(&["phone", "mobile", "contact", "tel"]) => ConstraintKind::Phone,
            _ if has(&["name"]) && !has(&["user"]) => ConstraintKind::Name,
            _ => ConstraintKind::Text,
        };
        let mut constraint = FieldConstraint::new(kind);
        // strength rules are for choosing a password, not for entering one
        let signing_in = element.attr("autocomplete") == Some("current-password")
            || page.is_some_and(|p| p.page_type == PageType::Login);
        if kind == ConstraintKind::Password && signing_in {
            constraint.strength = None;
        }
        constraint.required = element.attributes.contains_key("required");
        let number = |attr: &str| element.attr(attr).and_then(|v| v.trim().parse::<usize>().ok());
        constraint.min_length = number("minlength");
        constraint.max_length = number("maxlength");
        constraint.pattern = element
            .attr("pattern")
            .filter(|p| !p.is_empty() && regex::Regex::new(&format!("^(?:{p})$")).is_ok())
            .map(str::to_string);
        if kind == ConstraintKind::Choice {
            if let Some(page) = page {
                constraint.options = page
                    .element_digests
                    .iter()
                    .filter(|o| o.tag == "option" && o.parent.as_ref() == Some(&element.element_id))
                    .map(|o| o.attr("value").map_or_else(|| o.text.clone(), str::to_string))
                    .filter(|v| !v.is_empty())
                    .collect();
            }
            if constraint.options.is_empty() {
                constraint.kind = ConstraintKind::Text;
            }
        }
        constraint
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Required,
    Format,
    Pattern,
    MinLength,
    MaxLength,
    Classes,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::Required,
        Rule::Format,
        Rule::Pattern,
        Rule::MinLength,
        Rule::MaxLength,
        Rule::Classes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Required => "required",
            Rule::Format => "format",
            Rule::Pattern => "pattern",
            Rule::MinLength => "min_length",
            Rule::MaxLength => "max_length",
            Rule::Classes => "classes",
        }
    }

    pub fn parse(text: &str) -> Option<Rule> {
        let wanted = text.trim().to_ascii_lowercase().replace('-', "_");
        match wanted.as_str() {
            "strength" => Some(Rule::MinLength),
            "length" => Some(Rule::MinLength),
            _ => Rule::ALL.into_iter().find(|r| r.as_str() == wanted),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a slot's value should exercise. Serialized as a short string:
/// `valid`, `invalid`, `invalid:<rule>`, `empty`, `max_length`,
/// `unicode_name`, `match:<slot>`, `mismatch:<slot>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scenario {
    Valid,
    Invalid(Option<Rule>),
    Empty,
    MaxLength,
    UnicodeName,
    Match(String),
    Mismatch(String),
}

impl Scenario {
    pub fn paired_with(&self) -> Option<&str> {
        match self {
            Scenario::Match(other) | Scenario::Mismatch(other) => Some(other),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Valid => f.write_str("valid"),
            Scenario::Invalid(None) => f.write_str("invalid"),
            Scenario::Invalid(Some(rule)) => write!(f, "invalid:{rule}"),
            Scenario::Empty => f.write_str("empty"),
            Scenario::MaxLength => f.write_str("max_length"),
            Scenario::UnicodeName => f.write_str("unicode_name"),
            Scenario::Match(other) => write!(f, "match:{other}"),
            Scenario::Mismatch(other) => write!(f, "mismatch:{other}"),
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let text = text.trim();
        let (head, tail) = match text.split_once(':') {
            Some((h, t)) => (h.trim().to_ascii_lowercase(), Some(t.trim())),
            None => (text.to_ascii_lowercase(), None),
        };
        match (head.as_str(), tail) {
            ("valid", None) | ("", None) => Ok(Scenario::Valid),
            ("invalid", None) => Ok(Scenario::Invalid(None)),
            ("invalid", Some(rule)) => Rule::parse(rule)
                .map(|r| Scenario::Invalid(Some(r)))
                .ok_or_else(|| format!("unknown rule `{rule}`")),
            ("empty", None) => Ok(Scenario::Empty),
            ("max_length", None) => Ok(Scenario::MaxLength),
            ("unicode_name", None) => Ok(Scenario::UnicodeName),
            ("match", Some(other)) if !other.is_empty() => Ok(Scenario::Match(other.to_string())),
            ("mismatch", Some(other)) if !other.is_empty() => Ok(Scenario::Mismatch(other.to_string())),
            _ => Err(format!("unknown scenario `{text}`")),
        }
    }
}

impl TryFrom<String> for Scenario {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Scenario> for String {
    fn from(value: Scenario) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingSource {
    Provided,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataBinding {
    pub case_id: String,
    pub slot: String,
    pub source: BindingSource,
    pub value: String,
    /// The value was re-checked and satisfies the slot constraint.
    pub constraint_checked: bool,
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated_rule: Option<Rule>,
}

#[cfg(test)]
mod tests;
