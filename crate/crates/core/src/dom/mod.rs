//! Phase 1: element trees with stable identifiers, locators and sections.

mod sections;
mod selector;
mod tree;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crawler::{normalize_url, PageCapture};
pub use selector::{generate_locators, Selector, SelectorParseError, SelectorTree};
use tree::{Content, RawTree};

pub const MAX_TEXT_CHARS: usize = 200;

const INTERACTIVE_TAGS: &[&str] = &["a", "button", "input", "select", "textarea", "form"];
const INLINE_TAGS: &[&str] = &[
    "a", "abbr", "b", "code", "em", "i", "label", "mark", "small", "span", "strong", "sub", "sup",
    "u",
];
/// Input types that are buttons rather than data fields.
const NON_FIELD_INPUTS: &[&str] = &["hidden", "submit", "button", "reset", "image"];
const CONSTRAINT_ATTRS: &[&str] = &["minlength", "maxlength", "pattern", "min", "max", "step"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DomError {
    #[error("page {url} has an empty document")]
    EmptyDocument { url: String },
    #[error("no element tree could be recovered from {url}")]
    UnparseableDocument { url: String },
}

/// Page-scoped element identifier (`e0001`, `e0002`, ... in document order).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn from_index(index: usize) -> Self {
        Self(format!("e{:04}", index + 1))
    }

    pub fn new(raw: impl Into<String>) -> Self {
        Self(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Position in document order, if the id has the generated shape.
    pub fn index(&self) -> Option<usize> {
        let digits = self.0.strip_prefix('e')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse::<usize>().ok()?.checked_sub(1)
    }

    pub fn looks_valid(raw: &str) -> bool {
        ElementId::new(raw).index().is_some()
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionLabel {
    Navigation,
    Form,
    Content,
    Feedback,
    Other,
}

impl SectionLabel {
    pub const ALL: [SectionLabel; 5] = [
        SectionLabel::Navigation,
        SectionLabel::Form,
        SectionLabel::Content,
        SectionLabel::Feedback,
        SectionLabel::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionLabel::Navigation => "navigation",
            SectionLabel::Form => "form",
            SectionLabel::Content => "content",
            SectionLabel::Feedback => "feedback",
            SectionLabel::Other => "other",
        }
    }
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rendered box in CSS pixels. Only known once a browser has laid the page out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementNode {
    pub element_id: ElementId,
    pub tag: String,
    pub locator: String,
    pub attributes: BTreeMap<String, String>,
    pub text: String,
    pub geometry: Option<Geometry>,
    pub interactive: bool,
    pub visible: bool,
    pub parent: Option<ElementId>,
    pub children: Vec<ElementId>,
    pub section: SectionLabel,
    /// Byte offset of the start tag in the source document.
    pub source_offset: usize,
}

impl ElementNode {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    pub fn input_type(&self) -> Option<String> {
        match self.tag.as_str() {
            "input" => Some(
                self.attr("type")
                    .map(|t| t.trim().to_ascii_lowercase())
                    .filter(|t| !t.is_empty())
                    .unwrap_or_else(|| "text".into()),
            ),
            "button" => Some(
                self.attr("type")
                    .map(|t| t.trim().to_ascii_lowercase())
                    .unwrap_or_else(|| "submit".into()),
            ),
            _ => None,
        }
    }

    /// Submits its form when clicked.
    pub fn is_submit_control(&self) -> bool {
        matches!(
            (self.tag.as_str(), self.input_type().as_deref()),
            ("input", Some("submit" | "image")) | ("button", Some("submit"))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormField {
    pub element_id: ElementId,
    pub input_kind: String,
    pub required: bool,
    pub constraints: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageModel {
    pub url: String,
    pub title: String,
    pub root: ElementId,
    /// Document order; `elements[i].element_id == ElementId::from_index(i)`.
    pub elements: Vec<ElementNode>,
    pub sections: BTreeMap<SectionLabel, Vec<ElementId>>,
    pub form_fields: Vec<FormField>,
}

impl PageModel {
    pub fn element(&self, id: &ElementId) -> Option<&ElementNode> {
        self.elements.get(id.index()?).filter(|e| &e.element_id == id)
    }

    pub fn element_mut(&mut self, id: &ElementId) -> Option<&mut ElementNode> {
        self.elements.get_mut(id.index()?).filter(|e| &e.element_id == id)
    }

    pub fn root_node(&self) -> &ElementNode {
        &self.elements[0]
    }

    pub fn interactive_count(&self) -> usize {
        self.elements.iter().filter(|e| e.interactive).count()
    }

    /// Elements matched by `locator`, in document order.
    pub fn query(&self, locator: &str) -> Result<Vec<&ElementNode>, SelectorParseError> {
        let selector = Selector::parse(locator)?;
        Ok(selector.select(self).into_iter().map(|i| &self.elements[i]).collect())
    }

    /// Nearest ancestor (or self) with the given tag.
    pub fn closest(&self, id: &ElementId, tag: &str) -> Option<&ElementNode> {
        let mut cursor = self.element(id);
        while let Some(node) = cursor {
            if node.tag == tag {
                return Some(node);
            }
            cursor = node.parent.as_ref().and_then(|p| self.element(p));
        }
        None
    }

    /// Descendants of `id` in document order (excluding `id`).
    pub fn descendants(&self, id: &ElementId) -> Vec<&ElementNode> {
        let mut out = Vec::new();
        let mut stack: Vec<&ElementId> = match self.element(id) {
            Some(node) => node.children.iter().rev().collect(),
            None => return out,
        };
        while let Some(next) = stack.pop() {
            if let Some(node) = self.element(next) {
                out.push(node);
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// Checks the structural invariants; returns the first violation found.
    pub fn check_integrity(&self) -> Result<(), String> {
        if self.elements.is_empty() {
            return Err("no elements".into());
        }
        let roots: Vec<_> = self.elements.iter().filter(|e| e.parent.is_none()).collect();
        if roots.len() != 1 || roots[0].element_id != self.root {
            return Err(format!("expected one root, found {}", roots.len()));
        }
        for (i, node) in self.elements.iter().enumerate() {
            if node.element_id != ElementId::from_index(i) {
                return Err(format!("element {} out of order", node.element_id));
            }
            for child in &node.children {
                let child_node = self
                    .element(child)
                    .ok_or_else(|| format!("dangling child {child}"))?;
                if child_node.parent.as_ref() != Some(&node.element_id) {
                    return Err(format!("child {child} does not point back to {}", node.element_id));
                }
            }
            if let Some(g) = node.geometry {
                if g.width < 0.0 || g.height < 0.0 {
                    return Err(format!("negative geometry on {}", node.element_id));
                }
            }
        }
        let child_total: usize = self.elements.iter().map(|e| e.children.len()).sum();
        if self.elements.len() != 1 + child_total {
            return Err("element count does not match 1 + children".into());
        }
        let mut visited = HashSet::new();
        let mut stack = vec![&self.root];
        while let Some(id) = stack.pop() {
            if !visited.insert(id.clone()) {
                return Err(format!("{id} reached twice"));
            }
            stack.extend(self.element(id).into_iter().flat_map(|n| n.children.iter()));
        }
        if visited.len() != self.elements.len() {
            return Err("DFS from root does not reach every element".into());
        }
        let mut labelled = HashSet::new();
        for (label, ids) in &self.sections {
            for id in ids {
                let node = self.element(id).ok_or_else(|| format!("section lists unknown {id}"))?;
                if node.section != *label {
                    return Err(format!("{id} listed under {label} but labelled {}", node.section));
                }
                if !labelled.insert(id.clone()) {
                    return Err(format!("{id} in more than one section"));
                }
            }
        }
        if labelled.len() != self.elements.len() {
            return Err("sections do not cover every element".into());
        }
        for field in &self.form_fields {
            self.element(&field.element_id)
                .ok_or_else(|| format!("form field {} unknown", field.element_id))?;
        }
        Ok(())
    }
}

impl SelectorTree for PageModel {
    fn len(&self) -> usize {
        self.elements.len()
    }

    fn tag(&self, node: usize) -> &str {
        &self.elements[node].tag
    }

    fn attr(&self, node: usize, name: &str) -> Option<&str> {
        self.elements[node].attr(name)
    }

    fn parent(&self, node: usize) -> Option<usize> {
        self.elements[node].parent.as_ref().and_then(ElementId::index)
    }

    fn sibling_index(&self, node: usize) -> usize {
        let me = &self.elements[node];
        match me.parent.as_ref().and_then(|p| self.element(p)) {
            Some(parent) => parent
                .children
                .iter()
                .position(|c| c == &me.element_id)
                .map_or(1, |p| p + 1),
            None => 1,
        }
    }
}

struct RawView<'a> {
    tree: &'a RawTree,
    sibling_index: Vec<usize>,
}

impl<'a> RawView<'a> {
    fn new(tree: &'a RawTree) -> Self {
        let mut sibling_index = vec![1; tree.nodes.len()];
        for node in &tree.nodes {
            for (k, child) in node.children().enumerate() {
                sibling_index[child] = k + 1;
            }
        }
        Self { tree, sibling_index }
    }
}

impl SelectorTree for RawView<'_> {
    fn len(&self) -> usize {
        self.tree.nodes.len()
    }
    fn tag(&self, node: usize) -> &str {
        &self.tree.nodes[node].tag
    }
    fn attr(&self, node: usize, name: &str) -> Option<&str> {
        self.tree.nodes[node].attributes.get(name).map(String::as_str)
    }
    fn parent(&self, node: usize) -> Option<usize> {
        self.tree.nodes[node].parent
    }
    fn sibling_index(&self, node: usize) -> usize {
        self.sibling_index[node]
    }
}

/// Builds the page model for a successful capture.
pub fn build_page_model(capture: &PageCapture) -> Result<PageModel, DomError> {
    page_model_from_html(&capture.url, &capture.html)
}

pub fn page_model_from_html(url: &str, html: &str) -> Result<PageModel, DomError> {
    if html.trim().is_empty() {
        return Err(DomError::EmptyDocument { url: url.to_string() });
    }
    let tree = tree::parse(html).ok_or_else(|| DomError::UnparseableDocument {
        url: url.to_string(),
    })?;
    let locators = generate_locators(&RawView::new(&tree));

    let mut visible = vec![true; tree.nodes.len()];
    let mut elements = Vec::with_capacity(tree.nodes.len());
    for (i, raw) in tree.nodes.iter().enumerate() {
        let inherited = raw.parent.map_or(true, |p| visible[p]);
        visible[i] = inherited && !hides_itself(&raw.tag, &raw.attributes);
        let mut text = String::new();
        collect_text(&tree, i, &mut text, &mut false);
        elements.push(ElementNode {
            element_id: ElementId::from_index(i),
            tag: raw.tag.clone(),
            locator: locators[i].clone(),
            attributes: raw.attributes.clone(),
            text,
            geometry: None,
            interactive: is_interactive(&raw.tag, &raw.attributes),
            visible: visible[i],
            parent: raw.parent.map(ElementId::from_index),
            children: raw.children().map(ElementId::from_index).collect(),
            section: SectionLabel::Other,
            source_offset: raw.offset,
        });
    }
    let title = tree
        .nodes
        .iter()
        .position(|n| n.tag == "title")
        .map(|i| elements[i].text.clone())
        .unwrap_or_default();
    let form_fields = elements.iter().filter_map(form_field).collect();
    let model = PageModel {
        url: url.to_string(),
        title,
        root: ElementId::from_index(0),
        elements,
        sections: BTreeMap::new(),
        form_fields,
    };
    Ok(segment_sections(model))
}

/// Assigns each element exactly one section and rebuilds the section index.
pub fn segment_sections(mut model: PageModel) -> PageModel {
    let parents: Vec<Option<usize>> = model
        .elements
        .iter()
        .map(|e| e.parent.as_ref().and_then(ElementId::index))
        .collect();
    let labels = sections::label_all(&model.elements, &parents);
    let mut index: BTreeMap<SectionLabel, Vec<ElementId>> = BTreeMap::new();
    for (node, label) in model.elements.iter_mut().zip(labels) {
        node.section = label;
        index.entry(label).or_default().push(node.element_id.clone());
    }
    model.sections = index;
    model
}

fn is_interactive(tag: &str, attributes: &BTreeMap<String, String>) -> bool {
    INTERACTIVE_TAGS.contains(&tag)
        || (tag == "label" && attributes.contains_key("for"))
        || attributes.contains_key("onclick")
        || attributes.contains_key("href")
        || attributes
            .get("type")
            .is_some_and(|t| t.eq_ignore_ascii_case("submit"))
}

fn hides_itself(tag: &str, attributes: &BTreeMap<String, String>) -> bool {
    if sections::NON_RENDERED.contains(&tag) || attributes.contains_key("hidden") {
        return true;
    }
    if tag == "input"
        && attributes
            .get("type")
            .is_some_and(|t| t.eq_ignore_ascii_case("hidden"))
    {
        return true;
    }
    attributes.get("style").is_some_and(|style| {
        let compact: String = style
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        compact.contains("display:none") || compact.contains("visibility:hidden")
    })
}

/// Appends whitespace-collapsed visible text, stopping at `MAX_TEXT_CHARS`.
/// Returns true once the budget is exhausted.
fn collect_text(tree: &RawTree, node: usize, out: &mut String, pending_space: &mut bool) -> bool {
    let raw = &tree.nodes[node];
    let block = !INLINE_TAGS.contains(&raw.tag.as_str());
    if block {
        *pending_space = !out.is_empty();
    }
    for item in &raw.content {
        match item {
            Content::Text(text) => {
                for c in text.chars() {
                    if c.is_whitespace() {
                        *pending_space = !out.is_empty();
                        continue;
                    }
                    if *pending_space {
                        out.push(' ');
                        *pending_space = false;
                    }
                    out.push(c);
                    if out.chars().count() >= MAX_TEXT_CHARS {
                        truncate_chars(out, MAX_TEXT_CHARS);
                        return true;
                    }
                }
            }
            Content::Element(child) => {
                let tag = tree.nodes[*child].tag.as_str();
                if sections::NON_RENDERED.contains(&tag) {
                    continue;
                }
                if collect_text(tree, *child, out, pending_space) {
                    return true;
                }
            }
        }
    }
    if block {
        *pending_space = !out.is_empty();
    }
    false
}

fn truncate_chars(text: &mut String, max: usize) {
    if let Some((cut, _)) = text.char_indices().nth(max) {
        text.truncate(cut);
    }
}

fn form_field(node: &ElementNode) -> Option<FormField> {
    let kind = match node.tag.as_str() {
        "input" => {
            let kind = node.input_type().unwrap_or_else(|| "text".into());
            if NON_FIELD_INPUTS.contains(&kind.as_str()) {
                return None;
            }
            kind
        }
        "select" | "textarea" => node.tag.clone(),
        _ => return None,
    };
    let constraints = CONSTRAINT_ATTRS
        .iter()
        .filter_map(|name| node.attr(name).map(|v| (name.to_string(), v.to_string())))
        .collect();
    Some(FormField {
        element_id: node.element_id.clone(),
        input_kind: kind,
        required: node.attributes.contains_key("required"),
        constraints,
    })
}

/// Navigation-bearing links of a document (`a`/`area` href, form `action`,
/// `formaction`), normalized against `page_url`, deduplicated in document
/// order. Unresolvable or non-HTTP links are dropped.
pub fn extract_links(html: &str, page_url: &str) -> Vec<String> {
    let Some(tree) = tree::parse(html) else {
        return Vec::new();
    };
    let mut seen = HashSet::new();
    let mut links = Vec::new();
    for node in &tree.nodes {
        let candidates = [
            matches!(node.tag.as_str(), "a" | "area")
                .then(|| node.attributes.get("href"))
                .flatten(),
            (node.tag == "form").then(|| node.attributes.get("action")).flatten(),
            node.attributes.get("formaction"),
        ];
        for raw in candidates.into_iter().flatten() {
            if let Ok(url) = normalize_url(raw, page_url) {
                if seen.insert(url.clone()) {
                    links.push(url);
                }
            }
        }
    }
    links
}

#[cfg(test)]
mod tests;
