//! Rule-based semantic segmentation.
//!
//! Rules, first match wins:
//! 1. non-rendered nodes (`head` and its contents, `script`, `style`, ...) and
//!    the document scaffolding (`html`, `body`) → `other`
//! 2. the node or an ancestor carries alert/error semantics → `feedback`
//! 3. the node or an ancestor is `nav`/`header` (or role navigation/banner)
//!    → `navigation`
//! 4. the node or an ancestor is a `form` (or role form/search) → `form`
//! 5. everything else → `content`

use std::sync::OnceLock;

use regex::Regex;

use super::{ElementNode, SectionLabel};

pub(crate) const NON_RENDERED: &[&str] = &[
    "head", "script", "style", "meta", "link", "title", "template", "noscript", "base",
];

fn feedback_token() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(r"(?i)(^|[\s_-])(error|errors|alert|alerts|toast|flash|feedback|notice|invalid)([\s_-]|$)")
            .unwrap()
    })
}

fn has_feedback_semantics(node: &ElementNode) -> bool {
    if let Some(role) = node.attributes.get("role") {
        if matches!(role.as_str(), "alert" | "alertdialog" | "status") {
            return true;
        }
    }
    if node.attributes.contains_key("aria-live") {
        return true;
    }
    ["id", "class", "data-test"].iter().any(|attr| {
        node.attributes
            .get(*attr)
            .is_some_and(|v| feedback_token().is_match(v))
    })
}

fn is_navigation_node(node: &ElementNode) -> bool {
    matches!(node.tag.as_str(), "nav" | "header")
        || node
            .attributes
            .get("role")
            .is_some_and(|r| r == "navigation" || r == "banner")
}

fn is_form_node(node: &ElementNode) -> bool {
    node.tag == "form"
        || node
            .attributes
            .get("role")
            .is_some_and(|r| r == "form" || r == "search")
}

/// Labels every node. `nodes` must be in document order (parents first).
pub(crate) fn label_all(nodes: &[ElementNode], parent_index: &[Option<usize>]) -> Vec<SectionLabel> {
    // inherited flags per node: (non-rendered, feedback, navigation, form)
    let mut flags: Vec<(bool, bool, bool, bool)> = Vec::with_capacity(nodes.len());
    let mut labels = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        let inherited = parent_index[i].map(|p| flags[p]).unwrap_or_default();
        let own = (
            inherited.0 || NON_RENDERED.contains(&node.tag.as_str()),
            inherited.1 || has_feedback_semantics(node),
            inherited.2 || is_navigation_node(node),
            inherited.3 || is_form_node(node),
        );
        flags.push(own);
        let label = if own.0 || matches!(node.tag.as_str(), "html" | "body") {
            SectionLabel::Other
        } else if own.1 {
            SectionLabel::Feedback
        } else if own.2 {
            SectionLabel::Navigation
        } else if own.3 {
            SectionLabel::Form
        } else {
            SectionLabel::Content
        };
        labels.push(label);
    }
    labels
}
