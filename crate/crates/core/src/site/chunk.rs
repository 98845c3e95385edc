//! Rendering the representation into prompt-sized, hierarchy-preserving chunks.

use std::collections::{BTreeSet, VecDeque};

use super::{Chunk, ChunkScope, ElementDigest, PageEntry, SiteError, SiteRepresentation};
use crate::dom::{ElementId, SectionLabel};
use crate::estimate_tokens;

pub const MIN_BUDGET_TOKENS: usize = 256;
/// Navigation edges replicated into every chunk header.
const HEADER_NAV_EDGES: usize = 5;
const MAX_ATTR_CHARS: usize = 100;
const MAX_HEADER_FIELD_CHARS: usize = 100;

fn clip(text: &str, max: usize) -> &str {
    text.char_indices().nth(max).map_or(text, |(i, _)| &text[..i])
}

fn quoted(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' | '\r' | '\t' => out.push(' '),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// `- e0005 <input> locator="#user-name" parent=e0004 name="user-name" type="text" interactive text=""`
pub(crate) fn element_line(e: &ElementDigest) -> String {
    let mut line = format!("- {} <{}> locator={}", e.element_id, e.tag, quoted(&e.locator));
    if let Some(parent) = &e.parent {
        line.push_str(&format!(" parent={parent}"));
    }
    for (name, value) in &e.attributes {
        line.push_str(&format!(" {name}={}", quoted(clip(value, MAX_ATTR_CHARS))));
    }
    if e.interactive {
        line.push_str(" interactive");
    }
    if !e.visible {
        line.push_str(" hidden");
    }
    if !e.text.is_empty() {
        line.push_str(&format!(" text={}", quoted(&e.text)));
    }
    line
}

fn site_line(site: &SiteRepresentation) -> String {
    format!("SITE {} ({} pages)\n", site.base_url, site.pages.len())
}

fn page_header(site: &SiteRepresentation, url: &str, page: &PageEntry) -> String {
    let mut out = format!(
        "PAGE {url} [{}] {}\nSUMMARY {}\n",
        page.page_type,
        quoted(clip(&page.title, MAX_HEADER_FIELD_CHARS)),
        page.summary
    );
    let mut edges: Vec<_> = site.edges_from(url).collect();
    edges.sort_by_key(|e| e.priority);
    for edge in edges.into_iter().take(HEADER_NAV_EDGES) {
        out.push_str(&format!(
            "NAV {} {} -> {}\n",
            edge.priority,
            edge.via_element,
            clip(&edge.to_url, MAX_HEADER_FIELD_CHARS)
        ));
    }
    out
}

struct SectionBlock {
    label: SectionLabel,
    heading: String,
    lines: Vec<(ElementId, String)>,
}

impl SectionBlock {
    fn chars(&self) -> usize {
        self.heading.chars().count() + self.lines.iter().map(|(_, l)| l.chars().count()).sum::<usize>()
    }

    fn text(&self) -> String {
        let mut out = self.heading.clone();
        for (_, line) in &self.lines {
            out.push_str(line);
        }
        out
    }
}

fn section_blocks(page: &PageEntry) -> Vec<SectionBlock> {
    SectionLabel::ALL
        .into_iter()
        .filter_map(|label| {
            let lines: Vec<(ElementId, String)> = page
                .element_digests
                .iter()
                .filter(|e| e.section == label)
                .map(|e| (e.element_id.clone(), format!("{}\n", element_line(e))))
                .collect();
            (!lines.is_empty()).then(|| SectionBlock {
                label,
                heading: format!("SECTION {label} ({} elements)\n", lines.len()),
                lines,
            })
        })
        .collect()
}

/// The unsplit rendering of one page.
pub fn render_page(site: &SiteRepresentation, url: &str) -> Option<String> {
    let page = site.pages.get(url)?;
    let mut out = site_line(site);
    out.push_str(&page_header(site, url, page));
    for block in section_blocks(page) {
        out.push_str(&block.text());
    }
    Some(out)
}

/// Page order for generation: breadth-first from the base page following
/// edges by priority, then pages unreachable from it in lexicographic order.
pub fn flow_order(site: &SiteRepresentation) -> Vec<String> {
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    if site.pages.contains_key(&site.base_url) {
        let mut queue = VecDeque::from([site.base_url.clone()]);
        seen.insert(site.base_url.clone());
        while let Some(url) = queue.pop_front() {
            let mut edges: Vec<_> = site.edges_from(&url).collect();
            edges.sort_by_key(|e| e.priority);
            for edge in edges {
                if site.pages.contains_key(&edge.to_url) && seen.insert(edge.to_url.clone()) {
                    queue.push_back(edge.to_url.clone());
                }
            }
            order.push(url);
        }
    }
    order.extend(site.pages.keys().filter(|u| !seen.contains(*u)).cloned());
    order
}

struct Draft {
    page_url: String,
    whole_page: bool,
    sections: Vec<SectionLabel>,
    element_ids: Vec<ElementId>,
    ancestor_context: String,
    body: String,
}

/// One chunk per page when it fits; otherwise whole sections are packed
/// greedily under the page header, and a section that alone overflows is
/// split by element lines with its heading repeated.
pub fn build_chunk_plan(site: &SiteRepresentation, budget_tokens: usize) -> Result<Vec<Chunk>, SiteError> {
    if budget_tokens < MIN_BUDGET_TOKENS {
        return Err(SiteError::InvalidBudget { budget: budget_tokens });
    }
    let budget_chars = budget_tokens * 4;
    let site_text = site_line(site);
    let mut drafts = Vec::new();
    for url in flow_order(site) {
        let page = &site.pages[&url];
        let header = format!("{site_text}{}", page_header(site, &url, page));
        let blocks = section_blocks(page);
        let body_chars: usize = blocks.iter().map(SectionBlock::chars).sum();
        let header_chars = header.chars().count();
        if header_chars + body_chars <= budget_chars {
            drafts.push(Draft {
                page_url: url.clone(),
                whole_page: true,
                sections: blocks.iter().map(|b| b.label).collect(),
                element_ids: blocks.iter().flat_map(|b| b.lines.iter().map(|(id, _)| id.clone())).collect(),
                ancestor_context: site_text.clone(),
                body: format!("{}{}", &header[site_text.len()..], blocks.iter().map(SectionBlock::text).collect::<String>()),
            });
            continue;
        }
        let underflow = |what: String, chars: usize| SiteError::ChunkUnderflow {
            page: url.clone(),
            what,
            needed: chars.div_ceil(4),
            budget: budget_tokens,
        };
        let mut packed: Vec<&SectionBlock> = Vec::new();
        let mut packed_chars = 0;
        let flush = |packed: &mut Vec<&SectionBlock>, packed_chars: &mut usize, drafts: &mut Vec<Draft>| {
            if packed.is_empty() {
                return;
            }
            drafts.push(Draft {
                page_url: url.clone(),
                whole_page: false,
                sections: packed.iter().map(|b| b.label).collect(),
                element_ids: packed.iter().flat_map(|b| b.lines.iter().map(|(id, _)| id.clone())).collect(),
                ancestor_context: header.clone(),
                body: packed.iter().map(|b| b.text()).collect(),
            });
            packed.clear();
            *packed_chars = 0;
        };
        for block in &blocks {
            let chars = block.chars();
            if header_chars + packed_chars + chars <= budget_chars {
                packed.push(block);
                packed_chars += chars;
                continue;
            }
            flush(&mut packed, &mut packed_chars, &mut drafts);
            if header_chars + chars <= budget_chars {
                packed.push(block);
                packed_chars = chars;
                continue;
            }
            // split this section by element lines
            let context = format!("{header}{}", block.heading);
            let context_chars = context.chars().count();
            let mut piece: Vec<&(ElementId, String)> = Vec::new();
            let mut piece_chars = 0;
            for line in &block.lines {
                let line_chars = line.1.chars().count();
                if context_chars + line_chars > budget_chars {
                    return Err(underflow(format!("element {}", line.0), context_chars + line_chars));
                }
                if context_chars + piece_chars + line_chars > budget_chars {
                    drafts.push(piece_draft(&url, block.label, &context, &piece));
                    piece.clear();
                    piece_chars = 0;
                }
                piece.push(line);
                piece_chars += line_chars;
            }
            if !piece.is_empty() {
                drafts.push(piece_draft(&url, block.label, &context, &piece));
            }
        }
        flush(&mut packed, &mut packed_chars, &mut drafts);
        if blocks.is_empty() {
            return Err(underflow("page header".into(), header_chars));
        }
    }
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let rendered_text = format!("{}{}", d.ancestor_context, d.body);
            Chunk {
                chunk_id: format!("c{:03}", i + 1),
                estimated_tokens: estimate_tokens(&rendered_text),
                scope: ChunkScope {
                    page_url: d.page_url,
                    whole_page: d.whole_page,
                    sections: d.sections,
                    element_ids: d.element_ids,
                },
                rendered_text,
                ancestor_context: d.ancestor_context,
            }
        })
        .collect())
}

fn piece_draft(url: &str, label: SectionLabel, context: &str, lines: &[&(ElementId, String)]) -> Draft {
    Draft {
        page_url: url.to_string(),
        whole_page: false,
        sections: vec![label],
        element_ids: lines.iter().map(|(id, _)| id.clone()).collect(),
        ancestor_context: context.to_string(),
        body: lines.iter().map(|(_, l)| l.as_str()).collect(),
    }
}
