use std::collections::BTreeMap;

use regex::Regex;

use super::*;
use crate::dom::ElementId;
use crate::llm::{Backend, ChatMessage, LlmError};
use crate::testgen::{DataSlot, Priority, RequiredTypes, TestCase, TestSuite, TestType};

const SEEDS: u64 = 1000;

fn password() -> FieldConstraint {
    FieldConstraint::new(ConstraintKind::Password).required()
}

fn all_constraints() -> Vec<FieldConstraint> {
    let mut choice = FieldConstraint::new(ConstraintKind::Choice);
    choice.options = vec!["cardiology".into(), "dermatology".into(), "neurology".into()];
    let mut bounded_text = FieldConstraint::new(ConstraintKind::Text).required();
    bounded_text.min_length = Some(4);
    bounded_text.max_length = Some(12);
    let mut patterned_phone = FieldConstraint::new(ConstraintKind::Phone).required();
    patterned_phone.pattern = Some("[0-9]{10}".into());
    let mut short_name = FieldConstraint::new(ConstraintKind::Name);
    short_name.max_length = Some(20);
    vec![
        FieldConstraint::new(ConstraintKind::Email).required(),
        FieldConstraint::new(ConstraintKind::Phone).required(),
        password(),
        FieldConstraint::new(ConstraintKind::Text),
        bounded_text,
        FieldConstraint::new(ConstraintKind::Name).required(),
        short_name,
        choice,
        patterned_phone,
    ]
}

#[test]
fn valid_email_matches_the_address_format() {
    let oracle = Regex::new(r"^[^@\s]+@[^@\s]+\.[^@\s]+$").unwrap();
    let email = FieldConstraint::new(ConstraintKind::Email);
    for seed in 0..50 {
        let value = synthesize_value(&email, &Scenario::Valid, seed).unwrap().value;
        assert!(oracle.is_match(&value), "{value}");
    }
}

#[test]
fn weak_password_breaks_only_the_length_rule() {
    let out = synthesize_value(&password(), &Scenario::Invalid(Some(Rule::MinLength)), 7).unwrap();
    assert_eq!(out.value.chars().count(), 7);
    assert_eq!(out.violated, Some(Rule::MinLength));
    assert_eq!(check(&password(), &out.value), vec![Rule::MinLength]);
    // the default invalid rule for passwords is the length rule too
    let out = synthesize_value(&password(), &Scenario::Invalid(None), 7).unwrap();
    assert_eq!(out.violated, Some(Rule::MinLength));
}

#[test]
fn same_seed_same_value() {
    let phone = FieldConstraint::new(ConstraintKind::Phone);
    let a = synthesize_value(&phone, &Scenario::Valid, 42).unwrap();
    let b = synthesize_value(&phone, &Scenario::Valid, 42).unwrap();
    assert_eq!(a, b);
    let c = synthesize_value(&phone, &Scenario::Valid, 43).unwrap();
    assert_ne!(a.value, c.value);
}

#[test]
fn conflicting_pattern_and_length_is_unsatisfiable() {
    let mut c = FieldConstraint::new(ConstraintKind::Text);
    c.pattern = Some("[0-9]{3}".into());
    c.min_length = Some(5);
    assert!(matches!(
        synthesize_value(&c, &Scenario::Valid, 1),
        Err(DataError::UnsatisfiableConstraint(_))
    ));
}

#[test]
fn malformed_constraints_are_refused() {
    let mut c = FieldConstraint::new(ConstraintKind::Text);
    c.min_length = Some(9);
    c.max_length = Some(3);
    assert!(matches!(c.validate(), Err(DataError::InvalidConstraint(_))));
    let mut c = FieldConstraint::new(ConstraintKind::Text);
    c.pattern = Some("([a-z".into());
    assert!(matches!(synthesize_value(&c, &Scenario::Valid, 0), Err(DataError::InvalidConstraint(_))));
    assert!(FieldConstraint::new(ConstraintKind::Choice).validate().is_err());
}

#[test]
fn checker_reports_rules_in_order() {
    let c = password();
    assert_eq!(check(&c, ""), vec![Rule::Required]);
    assert_eq!(check(&c, "abc"), vec![Rule::MinLength, Rule::Classes]);
    assert!(check(&c, "Abcdef1!").is_empty());
    let optional = FieldConstraint::new(ConstraintKind::Email);
    assert!(check(&optional, "").is_empty());
    assert_eq!(check(&optional, "not-an-email"), vec![Rule::Format]);
}

#[test]
fn scenarios_round_trip_as_strings() {
    for text in ["valid", "invalid", "invalid:format", "empty", "max_length", "unicode_name", "match:password", "mismatch:password"] {
        let s: Scenario = text.parse().unwrap();
        assert_eq!(s.to_string(), text);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Scenario>(&json).unwrap(), s);
    }
    assert_eq!("invalid:strength".parse::<Scenario>().unwrap(), Scenario::Invalid(Some(Rule::MinLength)));
    assert!("bogus".parse::<Scenario>().is_err());
    assert!("match:".parse::<Scenario>().is_err());
}

#[test]
fn edge_cases_are_named_and_reported() {
    let name = FieldConstraint::new(ConstraintKind::Name).required();
    let unicode = edge_case(&name, EdgeCase::UnicodeName, 3).unwrap();
    assert!(!unicode.value.is_ascii());
    assert_eq!(unicode.violated, None);
    let empty = edge_case(&name, EdgeCase::Empty, 3).unwrap();
    assert_eq!((empty.value.as_str(), empty.violated), ("", Some(Rule::Required)));
    let mut bounded = FieldConstraint::new(ConstraintKind::Text);
    bounded.max_length = Some(30);
    assert_eq!(edge_case(&bounded, EdgeCase::MaxLength, 3).unwrap().value.chars().count(), 30);
}

/// Fidelity over every constraint kind, scenario and 1000 seeds, judged by
/// the independent checker.
#[test]
fn synthesis_fidelity_over_many_seeds() {
    for constraint in all_constraints() {
        for seed in 0..SEEDS {
            let valid = synthesize_value(&constraint, &Scenario::Valid, seed).unwrap();
            assert!(check(&constraint, &valid.value).is_empty(), "{constraint:?} valid {:?}", valid.value);
            assert_eq!(valid.violated, None);

            for rule in Rule::ALL {
                match synthesize_value(&constraint, &Scenario::Invalid(Some(rule)), seed) {
                    Ok(out) => {
                        assert_eq!(out.violated, Some(rule));
                        assert_eq!(check(&constraint, &out.value), vec![rule], "{constraint:?} {rule} {:?}", out.value);
                    }
                    Err(DataError::UnsatisfiableConstraint(_)) => {}
                    Err(e) => panic!("{e}"),
                }
            }
            if constraint.kind != ConstraintKind::Text || constraint.pattern.is_some() || constraint.min_length.is_some() {
                let out = synthesize_value(&constraint, &Scenario::Invalid(None), seed).unwrap();
                let rule = out.violated.expect("a rule is recorded");
                assert_eq!(check(&constraint, &out.value), vec![rule]);
            }

            for mismatch in [false, true] {
                if constraint.kind == ConstraintKind::Choice && constraint.options.len() < 2 {
                    continue;
                }
                let (a, b) = synthesize_pair(&constraint, mismatch, seed).unwrap();
                assert!(check(&constraint, &a).is_empty() && check(&constraint, &b).is_empty());
                assert_eq!(a == b, !mismatch);
            }
        }
    }
}

#[test]
fn rule_availability_per_kind() {
    // these rules have nothing to break for the given constraint
    let text = FieldConstraint::new(ConstraintKind::Text);
    for rule in Rule::ALL {
        assert!(synthesize_value(&text, &Scenario::Invalid(Some(rule)), 0).is_err(), "{rule}");
    }
    for rule in [Rule::MinLength, Rule::Classes, Rule::Required] {
        assert!(synthesize_value(&password(), &Scenario::Invalid(Some(rule)), 0).is_ok(), "{rule}");
    }
    let email = FieldConstraint::new(ConstraintKind::Email).required();
    assert_eq!(synthesize_value(&email, &Scenario::Invalid(None), 0).unwrap().violated, Some(Rule::Format));
}

#[test]
fn derived_seeds_differ_per_slot() {
    assert_eq!(derive_seed(1, "TC01", "email"), derive_seed(1, "TC01", "email"));
    assert_ne!(derive_seed(1, "TC01", "email"), derive_seed(1, "TC02", "email"));
    assert_ne!(derive_seed(1, "TC01", "email"), derive_seed(2, "TC01", "email"));
}

fn slot(element: usize, name: &str, constraint: FieldConstraint, scenario: Scenario) -> DataSlot {
    DataSlot {
        element_id: ElementId::from_index(element),
        page: None,
        slot: name.into(),
        constraint,
        scenario,
    }
}

fn case(id: &str, slots: Vec<DataSlot>) -> TestCase {
    TestCase {
        id: id.into(),
        name: format!("case {id}"),
        priority: Priority::High,
        description: "d".into(),
        test_type: TestType::new("field_validation"),
        target_page: "http://127.0.0.1:1/".into(),
        steps: Vec::new(),
        expected: Vec::new(),
        data_slots: slots,
    }
}

fn suite(cases: Vec<TestCase>) -> TestSuite {
    TestSuite {
        application: "t".into(),
        base_url: "http://127.0.0.1:1/".into(),
        instruction_text: String::new(),
        required_types: RequiredTypes {
            predefined: TestType::predefined(),
            extracted: Default::default(),
            required: TestType::predefined(),
        },
        minimum_cases: None,
        cases,
        provenance: BTreeMap::new(),
        rejected: Vec::new(),
        priority_overrides: 0,
    }
}

fn text() -> FieldConstraint {
    FieldConstraint::new(ConstraintKind::Text)
}

#[test]
fn normalization_folds_case_and_separators() {
    assert_eq!(normalize_name("user_name"), "username");
    assert_eq!(normalize_name("User-Name "), "username");
    assert_eq!(normalize_name("E mail"), "email");
}

#[test]
fn columns_map_exactly_then_by_normalized_name() {
    let data = Dataset::from_csv("email,user_name\nann@example.com,ann\n").unwrap();
    let s = suite(vec![case(
        "TC01",
        vec![
            slot(3, "email", FieldConstraint::new(ConstraintKind::Email), Scenario::Valid),
            slot(4, "username", text(), Scenario::Valid),
            slot(5, "password", password(), Scenario::Invalid(None)),
        ],
    )]);
    let bound = map_provided_data(&s, &data).unwrap();
    let values: Vec<_> = bound.iter().map(|b| (b.slot.as_str(), b.value.as_str())).collect();
    assert_eq!(values, vec![("email", "ann@example.com"), ("username", "ann")]);
    assert!(bound.iter().all(|b| b.source == BindingSource::Provided && b.constraint_checked));
}

#[test]
fn credentials_record_binds_login_slots() {
    let data = Dataset::from_csv("username,password\nstandard_user,secret_sauce\n").unwrap();
    let mut pw = FieldConstraint::new(ConstraintKind::Password);
    pw.strength = None;
    let s = suite(vec![case(
        "TC01",
        vec![slot(2, "username", text(), Scenario::Valid), slot(3, "password", pw, Scenario::Valid)],
    )]);
    let set = bind_suite(&s, Some(&data), None, 0).unwrap();
    assert_eq!(set.value("TC01", "username"), Some("standard_user"));
    assert_eq!(set.value("TC01", "password"), Some("secret_sauce"));
}

#[test]
fn unresolved_slots_are_listed() {
    let data = Dataset::from_csv("email\nx@y.zz\n").unwrap();
    let s = suite(vec![case("TC01", vec![slot(3, "email", text(), Scenario::Valid), slot(4, "phone", text(), Scenario::Valid)])]);
    match map_provided_data(&s, &data) {
        Err(DataError::UnmappableSlot { unresolved, mapped }) => {
            assert_eq!(unresolved, vec!["TC01/phone".to_string()]);
            assert_eq!(mapped.len(), 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn rows_follow_the_case_column() {
    let data = Dataset::from_csv("case_id,username,password\nTC01,first,\nTC02,second,pw\n").unwrap();
    assert_eq!(data.value("TC02", "username"), Some("second"));
    assert_eq!(data.value("TC09", "username"), None);
    // an empty cell is no value
    assert_eq!(data.value("TC01", "password"), None);
    let shared = Dataset::from_csv("username\nonly\n").unwrap();
    assert_eq!(shared.value("TC09", "username"), Some("only"));
    assert!(Dataset::from_csv("a,b\n1\n").is_err());
}

fn signup_case(id: &str, confirm: Scenario) -> TestCase {
    case(
        id,
        vec![
            slot(7, "confirm", password(), confirm),
            slot(6, "password", password(), Scenario::Valid),
            slot(4, "email", FieldConstraint::new(ConstraintKind::Email).required(), Scenario::Valid),
        ],
    )
}

#[test]
fn pairs_are_consistent_and_bindings_reproducible() {
    let s = suite(vec![
        signup_case("TC01", Scenario::Match("password".into())),
        signup_case("TC02", Scenario::Mismatch("password".into())),
    ]);
    for seed in 0..200 {
        let set = bind_suite(&s, None, None, seed).unwrap();
        assert_eq!(set.bindings.len(), 6);
        assert_eq!(set.value("TC01", "confirm"), set.value("TC01", "password"));
        assert_ne!(set.value("TC02", "confirm"), set.value("TC02", "password"));
        assert!(set.bindings.iter().all(|b| b.constraint_checked && check(&password(), &b.value).is_empty()
            || b.slot == "email"));
        assert_eq!(set, bind_suite(&s, None, None, seed).unwrap());
    }
    // bindings keep the declared slot order
    let set = bind_suite(&s, None, None, 0).unwrap();
    let order: Vec<_> = set.for_case("TC01").map(|b| b.slot.as_str()).collect();
    assert_eq!(order, vec!["confirm", "password", "email"]);
}

#[test]
fn pairing_with_a_missing_slot_fails() {
    let s = suite(vec![case("TC01", vec![slot(7, "confirm", password(), Scenario::Match("pw".into()))])]);
    assert!(matches!(bind_suite(&s, None, None, 0), Err(DataError::Binding { .. })));
}

struct Canned(&'static str);

impl Backend for Canned {
    fn id(&self) -> String {
        "canned".into()
    }
    fn context_limit(&self) -> usize {
        100_000
    }
    fn send(&self, _: &[ChatMessage]) -> Result<String, LlmError> {
        Ok(self.0.to_string())
    }
}

#[test]
fn model_mappings_are_verified_before_use() {
    let data = Dataset::from_csv("contact,mail\n5551234567,not-an-email\n").unwrap();
    let s = suite(vec![case(
        "TC01",
        vec![
            slot(3, "mobile", FieldConstraint::new(ConstraintKind::Phone), Scenario::Valid),
            slot(4, "email", FieldConstraint::new(ConstraintKind::Email), Scenario::Valid),
        ],
    )]);
    let oracle = Canned(r#"{"mappings": [{"slot": "mobile", "column": "contact"}, {"slot": "email", "column": "mail"}]}"#);
    let set = bind_suite(&s, Some(&data), Some(&oracle), 5).unwrap();
    assert_eq!(set.value("TC01", "mobile"), Some("5551234567"));
    assert_eq!(set.llm_mappings.get("TC01/mobile").map(String::as_str), Some("contact"));
    // the proposed email column fails the constraint, so the slot is synthesized
    let email = set.for_case("TC01").find(|b| b.slot == "email").unwrap();
    assert_eq!(email.source, BindingSource::Synthetic);
    assert!(email.constraint_checked);
}

#[test]
fn constraints_follow_field_markup() {
    let html = r#"<html><body><form>
        <input type="email" id="email" required>
        <input id="contact_number" name="contact_number" maxlength="10">
        <input type="password" id="pw" minlength="10">
        <input id="full_name" name="full_name">
        <input id="user-name">
        <select id="dept"><option value="a">A</option><option value="b">B</option></select>
        </form></body></html>"#;
    let model = crate::dom::page_model_from_html("http://127.0.0.1:1/", html).unwrap();
    let site = crate::site::synthesize_models("http://127.0.0.1:1/", vec![model], 4096, None).unwrap();
    let page = site.page("http://127.0.0.1:1/").unwrap();
    let by_id = |id: &str| {
        let d = page.element_digests.iter().find(|d| d.attr("id") == Some(id)).unwrap();
        FieldConstraint::for_element(d, Some(page))
    };
    assert_eq!(by_id("email").kind, ConstraintKind::Email);
    assert!(by_id("email").required);
    assert_eq!(by_id("contact_number").kind, ConstraintKind::Phone);
    assert_eq!(by_id("contact_number").max_length, Some(10));
    assert_eq!(by_id("pw").kind, ConstraintKind::Password);
    assert_eq!(effective_min_length(&by_id("pw")), Some(10));
    assert_eq!(by_id("full_name").kind, ConstraintKind::Name);
    assert_eq!(by_id("user-name").kind, ConstraintKind::Text);
    assert_eq!(by_id("dept").options, vec!["a".to_string(), "b".to_string()]);
}
