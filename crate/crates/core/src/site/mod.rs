//! Phase 2: fuse page models into the hierarchical site representation.

mod chunk;
mod classify;
mod navigation;
mod patterns;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crawler::{normalize_url, origin_of, PageCapture};
use crate::dom::{build_page_model, ElementId, ElementNode, Geometry, PageModel, SectionLabel};
use crate::llm::Backend;
pub use chunk::{build_chunk_plan, flow_order, render_page, MIN_BUDGET_TOKENS};
pub use classify::{classify_by_rules, classify_page, page_type_prompt};
pub use navigation::{derive_hierarchy, rank_navigation};
pub use patterns::{classify_segment, extract_url_patterns, DynamicSegment, SegmentKind, UrlPattern};

pub const DEFAULT_BUDGET_TOKENS: usize = 4096;

/// Attributes carried into element digests; everything else is noise for
/// generation (inline styles, event handler bodies, tracking data).
const DIGEST_ATTRS: &[&str] = &[
    "id", "name", "type", "class", "href", "action", "method", "placeholder", "role", "aria-label",
    "aria-live", "for", "required", "minlength", "maxlength", "pattern", "min", "max", "data-test",
    "formaction", "disabled", "title", "alt", "autocomplete",
];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SiteError {
    #[error("budget of {budget} tokens is below the minimum of {MIN_BUDGET_TOKENS}")]
    InvalidBudget { budget: usize },
    #[error("page {page}: {what} needs {needed} tokens, budget is {budget}")]
    ChunkUnderflow {
        page: String,
        what: String,
        needed: usize,
        budget: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageType {
    Login,
    Signup,
    Account,
    Listing,
    Detail,
    Form,
    Static,
}

impl PageType {
    pub const ALL: [PageType; 7] = [
        PageType::Login,
        PageType::Signup,
        PageType::Account,
        PageType::Listing,
        PageType::Detail,
        PageType::Form,
        PageType::Static,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PageType::Login => "login",
            PageType::Signup => "signup",
            PageType::Account => "account",
            PageType::Listing => "listing",
            PageType::Detail => "detail",
            PageType::Form => "form",
            PageType::Static => "static",
        }
    }

    /// Exact (case-insensitive, trimmed) membership; anything else is `None`.
    pub fn parse(text: &str) -> Option<PageType> {
        let wanted = text.trim().to_ascii_lowercase();
        PageType::ALL.into_iter().find(|t| t.as_str() == wanted)
    }
}

impl fmt::Display for PageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDigest {
    pub element_id: ElementId,
    pub tag: String,
    pub locator: String,
    pub parent: Option<ElementId>,
    pub section: SectionLabel,
    pub interactive: bool,
    pub visible: bool,
    pub attributes: BTreeMap<String, String>,
    pub text: String,
    pub geometry: Option<Geometry>,
}

impl ElementDigest {
    pub fn from_node(node: &ElementNode) -> Self {
        let mut attributes: BTreeMap<String, String> = node
            .attributes
            .iter()
            .filter(|(k, _)| DIGEST_ATTRS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        // Button captions and option values matter; other values (tokens,
        // prefilled data) only add churn.
        let keeps_value = node.tag == "option"
            || matches!(node.input_type().as_deref(), Some("submit" | "button" | "reset"));
        if keeps_value {
            if let Some(value) = node.attr("value") {
                attributes.insert("value".into(), value.to_string());
            }
        }
        Self {
            element_id: node.element_id.clone(),
            tag: node.tag.clone(),
            locator: node.locator.clone(),
            parent: node.parent.clone(),
            section: node.section,
            interactive: node.interactive,
            visible: node.visible,
            attributes,
            text: node.text.clone(),
            geometry: node.geometry,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    /// `type` of an input (default `text`), or the tag for select/textarea.
    pub fn field_kind(&self) -> Option<String> {
        match self.tag.as_str() {
            "input" => Some(
                self.attr("type")
                    .map(|t| t.trim().to_ascii_lowercase())
                    .filter(|t| !t.is_empty())
                    .unwrap_or_else(|| "text".into()),
            ),
            "select" | "textarea" => Some(self.tag.clone()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionDigest {
    pub label: SectionLabel,
    pub element_count: usize,
    pub interactive_count: usize,
    pub visible_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageEntry {
    pub summary: String,
    pub page_type: PageType,
    pub title: String,
    pub section_digests: Vec<SectionDigest>,
    pub element_digests: Vec<ElementDigest>,
}

impl PageEntry {
    pub fn element(&self, id: &ElementId) -> Option<&ElementDigest> {
        self.element_digests
            .get(id.index()?)
            .filter(|e| &e.element_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Link,
    Submit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavEdge {
    pub from_url: String,
    pub to_url: String,
    pub via_element: ElementId,
    /// Per-page rank, 1 = highest.
    pub priority: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkScope {
    pub page_url: String,
    pub whole_page: bool,
    pub sections: Vec<SectionLabel>,
    pub element_ids: Vec<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub scope: ChunkScope,
    pub rendered_text: String,
    pub estimated_tokens: usize,
    /// Breadcrumb repeated verbatim at the top of `rendered_text`.
    pub ancestor_context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRepresentation {
    pub base_url: String,
    pub budget_tokens: usize,
    pub pages: BTreeMap<String, PageEntry>,
    pub patterns: Vec<UrlPattern>,
    /// Sorted by source page, then priority.
    pub nav_edges: Vec<NavEdge>,
    /// child page → parent page.
    pub hierarchy: BTreeMap<String, String>,
    /// Edge targets outside the captured page set.
    pub external_urls: Vec<String>,
    /// Captured URLs that yielded no page model, with the reason.
    pub skipped_pages: BTreeMap<String, String>,
    pub chunk_plan: Vec<Chunk>,
}

impl SiteRepresentation {
    pub fn page(&self, url: &str) -> Option<&PageEntry> {
        self.pages.get(url)
    }

    pub fn element(&self, url: &str, id: &ElementId) -> Option<&ElementDigest> {
        self.pages.get(url)?.element(id)
    }

    pub fn edges_from<'a>(&'a self, url: &'a str) -> impl Iterator<Item = &'a NavEdge> + 'a {
        self.nav_edges.iter().filter(move |e| e.from_url == url)
    }

    /// Resolves a possibly relative URL against the base and normalizes it.
    pub fn resolve_url(&self, raw: &str) -> Option<String> {
        normalize_url(raw, &self.base_url).ok()
    }

    /// Pages reachable from the base page over navigation edges, base included.
    pub fn reachable_pages(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        if !self.pages.contains_key(&self.base_url) {
            return seen;
        }
        let mut queue = VecDeque::from([self.base_url.clone()]);
        seen.insert(self.base_url.clone());
        while let Some(url) = queue.pop_front() {
            for edge in self.edges_from(&url) {
                if self.pages.contains_key(&edge.to_url) && seen.insert(edge.to_url.clone()) {
                    queue.push_back(edge.to_url.clone());
                }
            }
        }
        seen
    }

    /// Target of a priority-1 edge from any reachable page, or the base itself.
    pub fn is_primary_flow_target(&self, url: &str) -> bool {
        url == self.base_url
            || self
                .nav_edges
                .iter()
                .any(|e| e.priority == 1 && e.to_url == url)
    }

    /// Checks cross-references, hierarchy shape and edge ranks.
    pub fn check_integrity(&self) -> Result<(), String> {
        let external: BTreeSet<&String> = self.external_urls.iter().collect();
        let mut ranks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for edge in &self.nav_edges {
            let page = self
                .pages
                .get(&edge.from_url)
                .ok_or_else(|| format!("edge from unknown page {}", edge.from_url))?;
            let via = page
                .element(&edge.via_element)
                .ok_or_else(|| format!("edge via unknown element {} on {}", edge.via_element, edge.from_url))?;
            if !via.interactive {
                return Err(format!("edge via non-interactive {}", edge.via_element));
            }
            if !self.pages.contains_key(&edge.to_url) && !external.contains(&edge.to_url) {
                return Err(format!("edge to unrecorded URL {}", edge.to_url));
            }
            ranks.entry(&edge.from_url).or_default().push(edge.priority);
        }
        for (page, mut list) in ranks {
            list.sort_unstable();
            if list.iter().enumerate().any(|(i, p)| *p != i + 1) {
                return Err(format!("priorities on {page} are not 1..n"));
            }
        }
        for (child, parent) in &self.hierarchy {
            if !self.pages.contains_key(child) || !self.pages.contains_key(parent) {
                return Err(format!("hierarchy link {child} -> {parent} dangles"));
            }
            let mut cursor = parent;
            let mut steps = 0;
            while let Some(next) = self.hierarchy.get(cursor) {
                cursor = next;
                steps += 1;
                if cursor == child || steps > self.hierarchy.len() {
                    return Err(format!("hierarchy cycle through {child}"));
                }
            }
        }
        let mut patterned = BTreeSet::new();
        for pattern in &self.patterns {
            for url in &pattern.member_urls {
                if !self.pages.contains_key(url) {
                    return Err(format!("pattern {} lists unknown {url}", pattern.template));
                }
                if !patterned.insert(url) {
                    return Err(format!("{url} belongs to two patterns"));
                }
            }
        }
        if patterned.len() != self.pages.len() {
            return Err("patterns do not cover every page".into());
        }
        for chunk in &self.chunk_plan {
            let page = self
                .pages
                .get(&chunk.scope.page_url)
                .ok_or_else(|| format!("chunk {} scoped to unknown page", chunk.chunk_id))?;
            if let Some(id) = chunk.scope.element_ids.iter().find(|id| page.element(id).is_none()) {
                return Err(format!("chunk {} lists unknown element {id}", chunk.chunk_id));
            }
            if chunk.estimated_tokens > self.budget_tokens {
                return Err(format!("chunk {} exceeds the budget", chunk.chunk_id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub base_url: String,
    pub budget_tokens: usize,
}

impl SynthesisOptions {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            budget_tokens: DEFAULT_BUDGET_TOKENS,
        }
    }
}

/// Builds the site representation from crawl captures. Failed captures and
/// unparseable documents are listed in `skipped_pages`.
pub fn synthesize(
    captures: &[PageCapture],
    options: &SynthesisOptions,
    oracle: Option<&dyn Backend>,
) -> Result<SiteRepresentation, SiteError> {
    let mut models = Vec::new();
    let mut skipped = BTreeMap::new();
    for capture in captures {
        if !capture.is_ok() {
            let reason = capture
                .error
                .clone()
                .unwrap_or_else(|| format!("HTTP {}", capture.status));
            skipped.insert(capture.url.clone(), reason);
            continue;
        }
        match build_page_model(capture) {
            Ok(model) => models.push(model),
            Err(e) => {
                skipped.insert(capture.url.clone(), e.to_string());
            }
        }
    }
    let mut site = synthesize_models(&options.base_url, models, options.budget_tokens, oracle)?;
    site.skipped_pages = skipped;
    Ok(site)
}

/// Builds the site representation from already-analysed pages.
pub fn synthesize_models(
    base_url: &str,
    models: Vec<PageModel>,
    budget_tokens: usize,
    oracle: Option<&dyn Backend>,
) -> Result<SiteRepresentation, SiteError> {
    if budget_tokens < MIN_BUDGET_TOKENS {
        return Err(SiteError::InvalidBudget { budget: budget_tokens });
    }
    let base_url = normalize_url(base_url, base_url).unwrap_or_else(|_| base_url.to_string());
    let urls: Vec<String> = models.iter().map(|m| m.url.clone()).collect();
    let known: BTreeSet<&String> = urls.iter().collect();
    let nav_edges = rank_navigation(&models);
    let external_urls: Vec<String> = nav_edges
        .iter()
        .filter(|e| !known.contains(&e.to_url))
        .map(|e| e.to_url.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let hierarchy = derive_hierarchy(&urls);

    let mut pages = BTreeMap::new();
    for model in &models {
        let page_type = classify_page(model, oracle);
        let edges: Vec<&NavEdge> = nav_edges.iter().filter(|e| e.from_url == model.url).collect();
        let section_digests = section_digests(model);
        let summary = summarize(model, page_type, &section_digests, &edges, hierarchy.get(&model.url));
        pages.insert(
            model.url.clone(),
            PageEntry {
                summary,
                page_type,
                title: model.title.clone(),
                section_digests,
                element_digests: model.elements.iter().map(ElementDigest::from_node).collect(),
            },
        );
    }
    let mut site = SiteRepresentation {
        base_url,
        budget_tokens,
        pages,
        patterns: extract_url_patterns(&urls),
        nav_edges,
        hierarchy,
        external_urls,
        skipped_pages: BTreeMap::new(),
        chunk_plan: Vec::new(),
    };
    site.chunk_plan = build_chunk_plan(&site, budget_tokens)?;
    Ok(site)
}

fn section_digests(model: &PageModel) -> Vec<SectionDigest> {
    model
        .sections
        .iter()
        .map(|(label, ids)| {
            let nodes: Vec<&ElementNode> = ids.iter().filter_map(|id| model.element(id)).collect();
            SectionDigest {
                label: *label,
                element_count: nodes.len(),
                interactive_count: nodes.iter().filter(|n| n.interactive).count(),
                visible_count: nodes.iter().filter(|n| n.visible).count(),
            }
        })
        .collect()
}

/// Short display form: path (plus query) for same-origin URLs.
pub(crate) fn display_url(url: &str, relative_to: &str) -> String {
    match (origin_of(url), origin_of(relative_to)) {
        (Some(a), Some(b)) if a == b && url.starts_with(&a) => url[a.len()..].to_string(),
        _ => url.to_string(),
    }
}

/// Template summary: type, counts, parent page and top-priority targets.
fn summarize(
    model: &PageModel,
    page_type: PageType,
    sections: &[SectionDigest],
    edges: &[&NavEdge],
    parent: Option<&String>,
) -> String {
    let interactive = model.interactive_count();
    let mut text = format!(
        "{page_type} page with {} elements ({interactive} interactive)",
        model.elements.len()
    );
    let listed: Vec<String> = sections
        .iter()
        .filter(|s| s.label != SectionLabel::Other)
        .map(|s| format!("{} {}", s.label, s.element_count))
        .collect();
    if !listed.is_empty() {
        text.push_str(&format!("; sections: {}", listed.join(", ")));
    }
    if let Some(parent) = parent {
        text.push_str(&format!("; under {}", display_url(parent, &model.url)));
    }
    let mut targets: Vec<String> = Vec::new();
    let mut sorted: Vec<&&NavEdge> = edges.iter().collect();
    sorted.sort_by_key(|e| e.priority);
    for edge in sorted {
        let shown = display_url(&edge.to_url, &model.url);
        if !targets.contains(&shown) {
            targets.push(shown);
        }
        if targets.len() == 3 {
            break;
        }
    }
    if !targets.is_empty() {
        text.push_str(&format!("; leads to {}", targets.join(", ")));
    }
    text
}
