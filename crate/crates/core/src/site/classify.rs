//! Page-type identification: deterministic rules first, the model second.

use std::collections::BTreeMap;

use super::chunk::element_line;
use super::{ElementDigest, PageType};
use crate::dom::{ElementNode, PageModel, SectionLabel};
use crate::llm::{complete, template_header, Backend, PromptEnvelope, SchemaId};

/// Fields typical of account creation, matched as substrings of a field's
/// name/id/placeholder/type/label text.
const REGISTRATION_HINTS: &[&str] = &[
    "name", "email", "mail", "phone", "tel", "mobile", "contact", "password", "confirm", "birth",
    "dob", "address", "gender",
];
const CONFIRM_HINTS: &[&str] = &["confirm", "repeat", "retype", "verify", "again"];
pub const SIGNUP_MIN_FIELDS: usize = 4;
pub const LISTING_MIN_ITEMS: usize = 3;

fn descriptor(node: &ElementNode) -> String {
    ["name", "id", "placeholder", "type", "aria-label", "autocomplete"]
        .iter()
        .filter_map(|a| node.attr(a))
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_lowercase()
}

/// Rule pass. `None` means the rules are inconclusive.
pub fn classify_by_rules(model: &PageModel) -> Option<PageType> {
    let fields: Vec<&ElementNode> = model
        .form_fields
        .iter()
        .filter_map(|f| model.element(&f.element_id))
        .collect();
    let passwords: Vec<&&ElementNode> = fields
        .iter()
        .filter(|n| n.input_type().as_deref() == Some("password"))
        .collect();
    let has_confirm = passwords.len() >= 2
        || passwords
            .iter()
            .any(|n| CONFIRM_HINTS.iter().any(|h| descriptor(n).contains(h)));
    let registration_fields = fields
        .iter()
        .filter(|n| {
            let d = descriptor(n);
            REGISTRATION_HINTS.iter().any(|h| d.contains(h)) && !d.contains("user")
        })
        .count();
    if !passwords.is_empty() && has_confirm || registration_fields >= SIGNUP_MIN_FIELDS {
        return Some(PageType::Signup);
    }
    if !passwords.is_empty() {
        return Some(PageType::Login);
    }
    if has_repeated_items(model) {
        return Some(PageType::Listing);
    }
    if !fields.is_empty() || model.elements.iter().any(|e| e.tag == "form") {
        return Some(PageType::Form);
    }
    if model.interactive_count() == 0 {
        return Some(PageType::Static);
    }
    None
}

/// A container outside navigation holding at least `LISTING_MIN_ITEMS`
/// non-leaf children with identical tag, class and child-tag sequence.
fn has_repeated_items(model: &PageModel) -> bool {
    model.elements.iter().any(|parent| {
        if matches!(parent.section, SectionLabel::Navigation | SectionLabel::Other) && parent.tag != "body" {
            return false;
        }
        let mut shapes: BTreeMap<(String, String, Vec<String>), usize> = BTreeMap::new();
        for child in parent.children.iter().filter_map(|c| model.element(c)) {
            if child.children.is_empty() || child.section == SectionLabel::Navigation {
                continue;
            }
            let child_tags = child
                .children
                .iter()
                .filter_map(|g| model.element(g))
                .map(|g| g.tag.clone())
                .collect();
            let class = child.attr("class").unwrap_or_default().to_string();
            *shapes.entry((child.tag.clone(), class, child_tags)).or_default() += 1;
        }
        shapes.values().any(|n| *n >= LISTING_MIN_ITEMS)
    })
}

pub fn page_type_prompt(model: &PageModel) -> PromptEnvelope {
    let mut text = template_header("page_type.v1");
    text.push_str(
        "\nClassify the page below into exactly one page type from this closed set: \
         login, signup, account, listing, detail, form, static.\n\
         Reply with JSON: {\"page_type\": \"<one of the set>\"}\n\n",
    );
    text.push_str(&format!("PAGE {} \"{}\"\n", model.url, model.title));
    for node in &model.elements {
        if node.section != SectionLabel::Other {
            text.push_str(&element_line(&ElementDigest::from_node(node)));
            text.push('\n');
        }
    }
    PromptEnvelope::new("page_type.v1", text, vec![model.url.clone()], SchemaId::PageType)
}

/// Total over any input: rules, then the oracle, then `static`.
pub fn classify_page(model: &PageModel, oracle: Option<&dyn Backend>) -> PageType {
    if let Some(page_type) = classify_by_rules(model) {
        return page_type;
    }
    let Some(backend) = oracle else {
        return PageType::Static;
    };
    match complete(&page_type_prompt(model), backend) {
        Ok(response) => response
            .parsed
            .as_ref()
            .and_then(|v| v["page_type"].as_str())
            .and_then(PageType::parse)
            .unwrap_or_else(|| {
                log::info!("{}: page type reply outside the closed set, using static", model.url);
                PageType::Static
            }),
        Err(e) => {
            log::warn!("{}: page type oracle failed ({e}), using static", model.url);
            PageType::Static
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::page_model_from_html;
    use crate::llm::{ChatMessage, LlmError};

    fn classify(html: &str) -> Option<PageType> {
        classify_by_rules(&page_model_from_html("https://s.test/", html).unwrap())
    }

    #[test]
    fn rule_table() {
        let login = r#"<form><input id="user-name" name="user-name"><input id="password" type="password">
            <input type="submit" value="Login"></form>"#;
        assert_eq!(classify(login), Some(PageType::Login));
        let signup = r#"<form><input name="fullName"><input name="contactNumber" type="tel">
            <input name="email" type="email"><input name="password" type="password">
            <input name="confirmPassword" type="password"><button>Register</button></form>"#;
        assert_eq!(classify(signup), Some(PageType::Signup));
        let no_password_signup = r#"<form><input name="first_name"><input name="last_name">
            <input name="email"><input name="phone"></form>"#;
        assert_eq!(classify(no_password_signup), Some(PageType::Signup));
        let listing = r#"<div class="list">
            <div class="item"><a href="/1">1</a><p>a</p></div>
            <div class="item"><a href="/2">2</a><p>b</p></div>
            <div class="item"><a href="/3">3</a><p>c</p></div></div>"#;
        assert_eq!(classify(listing), Some(PageType::Listing));
        assert_eq!(classify(r#"<form><input name="q"></form>"#), Some(PageType::Form));
        assert_eq!(classify("<h1>About</h1><p>Just text.</p>"), Some(PageType::Static));
        assert_eq!(classify(r#"<nav><a href="/a">a</a></nav><p>hi</p>"#), None);
    }

    #[test]
    fn navigation_lists_are_not_listings() {
        let html = r#"<nav><ul><li><a href="/1">1</a></li><li><a href="/2">2</a></li>
            <li><a href="/3">3</a></li></ul></nav>"#;
        assert_eq!(classify(html), None);
    }

    struct Fixed(&'static str);
    impl Backend for Fixed {
        fn id(&self) -> String {
            "fixed".into()
        }
        fn context_limit(&self) -> usize {
            100_000
        }
        fn send(&self, _: &[ChatMessage]) -> Result<String, LlmError> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn oracle_consulted_only_when_inconclusive() {
        let m = page_model_from_html("https://s.test/", r#"<nav><a href="/a">a</a></nav>"#).unwrap();
        assert_eq!(classify_page(&m, None), PageType::Static);
        assert_eq!(classify_page(&m, Some(&Fixed(r#"{"page_type": "Account"}"#))), PageType::Account);
        // adversarial replies are coerced into the closed set
        for reply in [r#"{"page_type": "dashboard"}"#, "garbage", r#"{"page_type": ""}"#] {
            assert_eq!(classify_page(&m, Some(&Fixed(reply))), PageType::Static);
        }
        let static_page = page_model_from_html("https://s.test/", "<p>x</p>").unwrap();
        assert_eq!(classify_page(&static_page, Some(&Fixed(r#"{"page_type": "login"}"#))), PageType::Static);
    }
}
