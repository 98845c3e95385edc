use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{FieldConstraint, Scenario};
use crate::dom::ElementId;

/// A test type label. The predefined set E is [`TestType::predefined`];
/// instruction extraction may add any other label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestType(String);

impl TestType {
    pub const FIELD_VALIDATION: &'static str = "field_validation";
    pub const ERROR_HANDLING: &'static str = "error_handling";
    pub const NAVIGATION: &'static str = "navigation";
    pub const DATA_CONSISTENCY: &'static str = "data_consistency";

    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into().trim().to_ascii_lowercase().replace([' ', '-'], "_"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn predefined() -> BTreeSet<TestType> {
        [
            Self::FIELD_VALIDATION,
            Self::ERROR_HANDLING,
            Self::NAVIGATION,
            Self::DATA_CONSISTENCY,
        ]
        .into_iter()
        .map(TestType::new)
        .collect()
    }
}

impl fmt::Display for TestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredTypes {
    /// E
    pub predefined: BTreeSet<TestType>,
    /// A
    pub extracted: BTreeSet<TestType>,
    /// R = E ∪ A
    pub required: BTreeSet<TestType>,
}

impl RequiredTypes {
    pub fn contains(&self, t: &TestType) -> bool {
        self.required.contains(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Priority {
    High,
    Medium,
    Low,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::High, Priority::Medium, Priority::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Priority::High => "High",
            Priority::Medium => "Medium",
            Priority::Low => "Low",
        }
    }

    /// Case-insensitive membership in the closed set.
    pub fn parse(text: &str) -> Option<Priority> {
        let wanted = text.trim();
        Priority::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(wanted))
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Navigate,
    Click,
    Type,
    Clear,
    Select,
    AssertText,
    AssertVisible,
    AssertUrl,
    Wait,
}

impl Verb {
    pub const ALL: [Verb; 9] = [
        Verb::Navigate,
        Verb::Click,
        Verb::Type,
        Verb::Clear,
        Verb::Select,
        Verb::AssertText,
        Verb::AssertVisible,
        Verb::AssertUrl,
        Verb::Wait,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Navigate => "navigate",
            Verb::Click => "click",
            Verb::Type => "type",
            Verb::Clear => "clear",
            Verb::Select => "select",
            Verb::AssertText => "assert_text",
            Verb::AssertVisible => "assert_visible",
            Verb::AssertUrl => "assert_url",
            Verb::Wait => "wait",
        }
    }

    pub fn parse(text: &str) -> Option<Verb> {
        let wanted = text.trim().to_ascii_lowercase();
        Verb::ALL.into_iter().find(|v| v.as_str() == wanted)
    }

    /// navigate and assert_url target URLs; everything else an element.
    pub fn takes_url(self) -> bool {
        matches!(self, Verb::Navigate | Verb::AssertUrl)
    }

    pub fn requires_argument(self) -> bool {
        matches!(self, Verb::Type | Verb::Select | Verb::AssertText)
    }

    pub fn is_assertion(self) -> bool {
        matches!(self, Verb::AssertText | Verb::AssertVisible | Verb::AssertUrl)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const SLOT_PREFIX: &str = "slot:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestStep {
    pub ordinal: usize,
    pub verb: Verb,
    /// Absolute URL for URL verbs, element id otherwise.
    pub target: String,
    /// Page holding the target element when it is not the case's target page.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    /// Literal text or `slot:NAME`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argument: Option<String>,
}

impl TestStep {
    pub fn slot_ref(&self) -> Option<&str> {
        self.argument.as_deref()?.strip_prefix(SLOT_PREFIX)
    }

    pub fn page_or<'a>(&'a self, target_page: &'a str) -> &'a str {
        self.page.as_deref().unwrap_or(target_page)
    }

    /// Identity used for duplicate detection (ordinal excluded).
    pub fn signature(&self) -> (Verb, &str, Option<&str>, Option<&str>) {
        (self.verb, &self.target, self.page.as_deref(), self.argument.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSlot {
    pub element_id: ElementId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    pub slot: String,
    pub constraint: FieldConstraint,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub name: String,
    pub priority: Priority,
    pub description: String,
    pub test_type: TestType,
    pub target_page: String,
    pub steps: Vec<TestStep>,
    pub expected: Vec<String>,
    pub data_slots: Vec<DataSlot>,
}

impl TestCase {
    pub fn slot(&self, name: &str) -> Option<&DataSlot> {
        self.data_slots.iter().find(|s| s.slot == name)
    }
}

pub fn case_id(ordinal: usize) -> String {
    format!("TC{ordinal:02}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub chunk_id: String,
    pub prompt_digest: String,
    /// Accepted from the refinement round rather than the first reply.
    pub refined: bool,
    /// Priority text as proposed by the model.
    pub proposed_priority: String,
    pub priority_overridden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedCase {
    pub chunk_id: String,
    pub name: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub application: String,
    pub base_url: String,
    pub instruction_text: String,
    pub required_types: RequiredTypes,
    pub minimum_cases: Option<usize>,
    pub cases: Vec<TestCase>,
    /// case id → where it came from
    pub provenance: BTreeMap<String, Provenance>,
    pub rejected: Vec<RejectedCase>,
    pub priority_overrides: usize,
}

impl TestSuite {
    pub fn case(&self, id: &str) -> Option<&TestCase> {
        self.cases.iter().find(|c| c.id == id)
    }
}
