use super::*;

const LOGIN: &str = r#"<!DOCTYPE html>
<html><head><title>Swag Labs</title><script>var x = "<b>";</script></head>
<body>
  <header><nav><a href="/about">About</a><a href="/help">Help</a></nav></header>
  <div class="login_wrapper">
    <form action="/inventory.html" method="post">
      <input id="user-name" name="user-name" type="text" placeholder="Username" required>
      <input id="password" name="password" type="password" minlength="8">
      <input type="hidden" name="csrf" value="t">
      <input id="login-button" type="submit" value="Login">
    </form>
    <div id="error-container" class="error-message-container"><h3 data-test="error">Epic sadface</h3></div>
    <p>Accepted   usernames
       are:</p>
    <p style="display: none">secret <span>inner</span></p>
  </div>
</body></html>"#;

fn model() -> PageModel {
    page_model_from_html("https://example.test/", LOGIN).unwrap()
}

fn by_locator<'a>(m: &'a PageModel, loc: &str) -> &'a ElementNode {
    let hits = m.query(loc).unwrap();
    assert_eq!(hits.len(), 1, "{loc}");
    hits[0]
}

#[test]
fn ids_follow_document_order() {
    let m = model();
    assert_eq!(m.root, ElementId::new("e0001"));
    assert_eq!(m.elements[0].tag, "html");
    for (i, e) in m.elements.iter().enumerate() {
        assert_eq!(e.element_id, ElementId::from_index(i));
        assert_eq!(m.element(&e.element_id).unwrap().tag, e.tag);
    }
    let offsets: Vec<_> = m.elements.iter().map(|e| e.source_offset).collect();
    assert!(offsets.windows(2).all(|w| w[0] < w[1]));
    m.check_integrity().unwrap();
}

#[test]
fn element_id_round_trip() {
    assert_eq!(ElementId::from_index(0).as_str(), "e0001");
    assert_eq!(ElementId::from_index(41).index(), Some(41));
    assert_eq!(ElementId::new("e0").index(), None);
    assert_eq!(ElementId::new("x0001").index(), None);
    assert!(!ElementId::looks_valid("e12a"));
}

#[test]
fn minimal_document_has_two_elements() {
    let m = page_model_from_html("http://a/", "<html><body></body></html>").unwrap();
    assert_eq!(m.elements.len(), 2);
    assert_eq!(m.elements[1].parent, Some(m.root.clone()));
    m.check_integrity().unwrap();
}

#[test]
fn empty_and_textual_documents_fail() {
    assert_eq!(
        page_model_from_html("http://a/", "  \n "),
        Err(DomError::EmptyDocument { url: "http://a/".into() })
    );
    assert_eq!(
        page_model_from_html("http://a/", "just text, no markup"),
        Err(DomError::UnparseableDocument { url: "http://a/".into() })
    );
}

#[test]
fn locators_resolve_to_their_element() {
    let m = model();
    for e in &m.elements {
        let hits = m.query(&e.locator).unwrap();
        assert_eq!(hits.len(), 1, "{} -> {}", e.element_id, e.locator);
        assert_eq!(hits[0].element_id, e.element_id);
    }
    assert_eq!(by_locator(&m, "#user-name").tag, "input");
}

#[test]
fn title_and_text() {
    let m = model();
    assert_eq!(m.title, "Swag Labs");
    let p = m.elements.iter().find(|e| e.text.starts_with("Accepted")).unwrap();
    assert_eq!(p.text, "Accepted usernames are:");
    // script contents never leak into text
    assert!(!m.elements[0].text.contains("var x"));
}

#[test]
fn text_is_truncated() {
    let html = format!("<div>{}</div>", "word ".repeat(100));
    let m = page_model_from_html("http://a/", &html).unwrap();
    assert_eq!(m.elements[0].text.chars().count(), MAX_TEXT_CHARS);
}

#[test]
fn visibility_rules() {
    let m = model();
    let hidden_input = m.query("input[type=hidden]").unwrap()[0];
    assert!(!hidden_input.visible);
    let styled = m.elements.iter().find(|e| e.text.starts_with("secret")).unwrap();
    assert!(!styled.visible);
    let span = m.element(&styled.children[0]).unwrap();
    assert!(!span.visible, "descendants of hidden nodes are hidden");
    assert!(by_locator(&m, "#password").visible);
    assert!(!m.query("title").unwrap()[0].visible);
}

#[test]
fn interactive_flags() {
    let m = model();
    assert!(by_locator(&m, "#login-button").interactive);
    assert!(m.query("form").unwrap()[0].interactive);
    assert!(!by_locator(&m, "#error-container").interactive);
    let html = r#"<div><span onclick="go()">x</span><label for="a">A</label><label>B</label></div>"#;
    let m = page_model_from_html("http://a/", html).unwrap();
    let flags: Vec<_> = m.elements.iter().map(|e| e.interactive).collect();
    assert_eq!(flags, vec![false, true, true, false]);
}

#[test]
fn sections_partition_elements() {
    let m = model();
    assert_eq!(m.elements[0].section, SectionLabel::Other);
    assert_eq!(m.query("body").unwrap()[0].section, SectionLabel::Other);
    assert_eq!(m.query("head").unwrap()[0].section, SectionLabel::Other);
    assert_eq!(m.query("nav a").unwrap()[0].section, SectionLabel::Navigation);
    assert_eq!(by_locator(&m, "#user-name").section, SectionLabel::Form);
    assert_eq!(by_locator(&m, "#error-container").section, SectionLabel::Feedback);
    assert_eq!(m.query("h3").unwrap()[0].section, SectionLabel::Feedback);
    assert_eq!(m.query(".login_wrapper").unwrap()[0].section, SectionLabel::Content);
    let total: usize = m.sections.values().map(Vec::len).sum();
    assert_eq!(total, m.elements.len());
}

#[test]
fn form_fields_and_constraints() {
    let m = model();
    let kinds: Vec<_> = m.form_fields.iter().map(|f| f.input_kind.as_str()).collect();
    assert_eq!(kinds, vec!["text", "password"]);
    assert!(m.form_fields[0].required);
    assert_eq!(m.form_fields[1].constraints.get("minlength").map(String::as_str), Some("8"));
}

#[test]
fn links_are_normalized_and_deduplicated() {
    let html = r##"<a href="/b/">b</a><a href="#top">top</a><a href="mailto:x@y">m</a>
        <form action="submit"><button formaction="/alt">go</button></form><a href="/b">again</a>
        <area href="https://other.test/x">"##;
    assert_eq!(
        extract_links(html, "https://site.test/a/"),
        vec![
            "https://site.test/b",
            "https://site.test/a",
            "https://site.test/a/submit",
            "https://site.test/alt",
            "https://other.test/x",
        ]
    );
}

#[test]
fn section_labels_serialize_lowercase() {
    assert_eq!(serde_json::to_string(&SectionLabel::Feedback).unwrap(), "\"feedback\"");
}

#[test]
fn model_round_trips_through_json() {
    let m = model();
    let text = serde_json::to_string(&m).unwrap();
    let back: PageModel = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
}
