//! Headless form-semantics session: pages are parsed into page models,
//! typing mutates field state, submit controls post their forms, links
//! navigate and assertions read the model. Time is virtual.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};

use super::session::{HttpRequest, HttpResponse, Method, Session, StepError, Transport};
use super::ActionCommand;
use crate::crawler::normalize_url;
use crate::data::EMAIL_FORMAT;
use crate::dom::{page_model_from_html, ElementNode, Geometry, PageModel};
use crate::testgen::Verb;

/// Start of the virtual clock, so hermetic runs carry stable timestamps.
pub const SIMULATED_EPOCH: &str = "2025-01-01T00:00:00Z";
const NAVIGATION_MS: u64 = 120;
const ACTION_MS: u64 = 25;
const ASSERT_MS: u64 = 5;
const DEFAULT_WAIT_MS: u64 = 1_000;
const ROW_HEIGHT: f64 = 24.0;

struct LoadedPage {
    url: String,
    model: PageModel,
    values: BTreeMap<usize, String>,
    checked: BTreeSet<usize>,
    selected: BTreeMap<usize, String>,
}

pub struct SimulatedSession {
    transport: Box<dyn Transport>,
    label: String,
    epoch: DateTime<Utc>,
    clock_ms: u64,
    page: Option<LoadedPage>,
}

impl SimulatedSession {
    pub fn new(transport: Box<dyn Transport>, label: impl Into<String>) -> Self {
        Self {
            transport,
            label: label.into(),
            epoch: SIMULATED_EPOCH.parse().expect("valid epoch"),
            clock_ms: 0,
            page: None,
        }
    }

    pub fn current_url(&self) -> Option<&str> {
        self.page.as_ref().map(|p| p.url.as_str())
    }

    pub fn current_model(&self) -> Option<&PageModel> {
        self.page.as_ref().map(|p| &p.model)
    }

    pub fn title(&self) -> Option<&str> {
        self.page.as_ref().map(|p| p.model.title.as_str())
    }

    /// Waits for `locator` like a find step would; for protocol adapters.
    pub fn locate(&mut self, locator: &str, timeout_ms: u64) -> Result<(), StepError> {
        self.find(locator, timeout_ms).map(drop)
    }

    pub fn element_text(&mut self, locator: &str, timeout_ms: u64) -> Result<String, StepError> {
        let index = self.find(locator, timeout_ms)?;
        Ok(self.rendered_text(index))
    }

    pub fn element_displayed(&mut self, locator: &str, timeout_ms: u64) -> Result<bool, StepError> {
        let index = self.find(locator, timeout_ms)?;
        Ok(self.node(index).visible)
    }

    fn tick(&mut self, ms: u64) {
        self.clock_ms += ms;
    }

    fn request(&mut self, request: HttpRequest, timeout_ms: u64) -> Result<(), StepError> {
        let response = match self.transport.send(&request, timeout_ms) {
            Ok(r) => r,
            Err(e) => {
                if matches!(e, StepError::Timeout { .. }) {
                    self.tick(timeout_ms);
                }
                return Err(e);
            }
        };
        if response.delay_ms > timeout_ms {
            self.tick(timeout_ms);
            return Err(StepError::Timeout {
                what: format!("response from {}", request.url),
                waited_ms: timeout_ms,
            });
        }
        self.tick(response.delay_ms + NAVIGATION_MS);
        self.load(response)
    }

    fn load(&mut self, response: HttpResponse) -> Result<(), StepError> {
        let html = if response.body.trim().is_empty() { "<html></html>" } else { &response.body };
        let model = match page_model_from_html(&response.url, html) {
            Ok(model) => model,
            // an error page is still shown even when it is not markup
            Err(_) if response.status >= 500 => page_model_from_html(&response.url, "<html></html>")
                .map_err(|e| StepError::Other(format!("unrenderable page: {e}")))?,
            Err(e) => return Err(StepError::Other(format!("unrenderable page: {e}"))),
        };
        self.page = Some(LoadedPage {
            url: response.url.clone(),
            model,
            values: BTreeMap::new(),
            checked: BTreeSet::new(),
            selected: BTreeMap::new(),
        });
        if response.status >= 500 {
            return Err(StepError::Server { status: response.status, url: response.url });
        }
        Ok(())
    }

    fn loaded(&self) -> Result<&LoadedPage, StepError> {
        self.page.as_ref().ok_or_else(|| StepError::ElementNotFound("no page is loaded".into()))
    }

    /// First element matching `locator`; a miss costs the full wait.
    fn find(&mut self, locator: &str, timeout_ms: u64) -> Result<usize, StepError> {
        let page = self.loaded()?;
        let found = page
            .model
            .query(locator)
            .map_err(|e| StepError::Other(format!("bad locator {locator}: {e}")))?
            .first()
            .and_then(|n| n.element_id.index());
        match found {
            Some(i) => Ok(i),
            None => {
                let url = page.url.clone();
                self.tick(timeout_ms);
                Err(StepError::ElementNotFound(format!("{locator} on {url} (waited {timeout_ms} ms)")))
            }
        }
    }

    fn node(&self, index: usize) -> &ElementNode {
        &self.page.as_ref().expect("page loaded").model.elements[index]
    }

    fn parent_of(&self, index: usize) -> Option<usize> {
        self.node(index).parent.as_ref().and_then(|p| p.index())
    }

    fn interactable(&self, index: usize) -> bool {
        let node = self.node(index);
        if !node.visible || node.attributes.contains_key("disabled") {
            return false;
        }
        let mut cursor = Some(index);
        while let Some(i) = cursor {
            if self.node(i).attributes.contains_key("inert") {
                return false;
            }
            cursor = self.parent_of(i);
        }
        true
    }

    fn require_interactable(&self, index: usize, locator: &str) -> Result<(), StepError> {
        if self.interactable(index) {
            Ok(())
        } else {
            Err(StepError::NotInteractable(format!("{locator} is hidden, disabled or inert")))
        }
    }

    fn value_of(&self, index: usize) -> String {
        let page = self.page.as_ref().expect("page loaded");
        if let Some(v) = page.values.get(&index) {
            return v.clone();
        }
        let node = &page.model.elements[index];
        match node.tag.as_str() {
            "textarea" => node.text.clone(),
            "select" => page.selected.get(&index).cloned().unwrap_or_else(|| {
                self.options(index)
                    .into_iter()
                    .next()
                    .map(|o| self.option_value(o))
                    .unwrap_or_default()
            }),
            _ => node.attr("value").unwrap_or_default().to_string(),
        }
    }

    fn options(&self, select: usize) -> Vec<usize> {
        let model = &self.page.as_ref().expect("page loaded").model;
        model
            .descendants(&model.elements[select].element_id)
            .into_iter()
            .filter(|n| n.tag == "option")
            .filter_map(|n| n.element_id.index())
            .collect()
    }

    fn option_value(&self, option: usize) -> String {
        let node = self.node(option);
        node.attr("value").map_or_else(|| node.text.clone(), str::to_string)
    }

    fn form_of(&self, index: usize) -> Option<usize> {
        let page = self.page.as_ref()?;
        if let Some(id) = page.model.elements[index].attr("form") {
            return page
                .model
                .elements
                .iter()
                .find(|n| n.tag == "form" && n.attr("id") == Some(id))
                .and_then(|n| n.element_id.index());
        }
        page.model
            .closest(&page.model.elements[index].element_id, "form")
            .and_then(|n| n.element_id.index())
    }

    fn resolve(&self, raw: &str) -> Result<String, StepError> {
        let base = self.loaded()?.url.clone();
        normalize_url(raw, &base).map_err(|e| StepError::Other(e.to_string()))
    }

    fn field_invalid(&self, index: usize) -> Option<String> {
        let node = self.node(index);
        let value = self.value_of(index);
        let name = node.attr("name").or(node.attr("id")).unwrap_or(&node.tag).to_string();
        if node.attributes.contains_key("required") && value.is_empty() {
            return Some(format!("{name} is required"));
        }
        if value.is_empty() {
            return None;
        }
        let length = value.chars().count();
        let bound = |attr: &str| node.attr(attr).and_then(|v| v.trim().parse::<usize>().ok());
        if bound("minlength").is_some_and(|min| length < min) || bound("maxlength").is_some_and(|max| length > max) {
            return Some(format!("{name} has the wrong length"));
        }
        if let Some(pattern) = node.attr("pattern") {
            if regex::Regex::new(&format!("^(?:{pattern})$")).is_ok_and(|re| !re.is_match(&value)) {
                return Some(format!("{name} does not match its pattern"));
            }
        }
        if node.input_type().as_deref() == Some("email")
            && !regex::Regex::new(EMAIL_FORMAT).expect("static").is_match(&value)
        {
            return Some(format!("{name} is not an email address"));
        }
        None
    }

    fn submit(&mut self, form: usize, submitter: Option<usize>, timeout_ms: u64) -> Result<(), StepError> {
        let model = &self.page.as_ref().expect("page loaded").model;
        let form_node = &model.elements[form];
        let fields: Vec<usize> = model
            .descendants(&form_node.element_id)
            .into_iter()
            .filter(|n| matches!(n.tag.as_str(), "input" | "select" | "textarea"))
            .filter(|n| !n.attributes.contains_key("disabled"))
            .filter_map(|n| n.element_id.index())
            .collect();
        let skip_validation = form_node.attributes.contains_key("novalidate")
            || submitter.is_some_and(|s| self.node(s).attributes.contains_key("formnovalidate"));
        if !skip_validation {
            if let Some(problem) = fields.iter().find_map(|f| self.field_invalid(*f)) {
                // the browser keeps the page and shows a validation bubble
                log::debug!("submission blocked: {problem}");
                self.tick(ACTION_MS);
                return Ok(());
            }
        }

        let mut pairs = Vec::new();
        for &field in &fields {
            let node = self.node(field);
            let Some(name) = node.attr("name") else { continue };
            let kind = node.input_type().unwrap_or_default();
            match (node.tag.as_str(), kind.as_str()) {
                ("input", "submit" | "button" | "reset" | "image" | "file") => {}
                ("input", "checkbox" | "radio") => {
                    if self.page.as_ref().expect("page loaded").checked.contains(&field) {
                        pairs.push((name.to_string(), node.attr("value").unwrap_or("on").to_string()));
                    }
                }
                _ => pairs.push((name.to_string(), self.value_of(field))),
            }
        }
        if let Some(s) = submitter {
            let node = self.node(s);
            if let Some(name) = node.attr("name") {
                pairs.push((name.to_string(), node.attr("value").unwrap_or_default().to_string()));
            }
        }

        let pick = |attr: &str, form_attr: &str| {
            submitter
                .and_then(|s| self.node(s).attr(attr))
                .or_else(|| self.node(form).attr(form_attr))
                .map(str::to_string)
        };
        let action = pick("formaction", "action").filter(|a| !a.trim().is_empty());
        let url = match action {
            Some(a) => self.resolve(&a)?,
            None => self.loaded()?.url.clone(),
        };
        let method = pick("formmethod", "method").unwrap_or_default().to_ascii_lowercase();
        let request = if method == "post" {
            HttpRequest { method: Method::Post, url, form: pairs }
        } else {
            let mut parsed = url::Url::parse(&url).map_err(|e| StepError::Other(e.to_string()))?;
            parsed.query_pairs_mut().clear().extend_pairs(pairs.iter());
            HttpRequest::get(parsed.to_string())
        };
        self.request(request, timeout_ms)
    }

    fn click(&mut self, index: usize, timeout_ms: u64) -> Result<(), StepError> {
        let node = self.node(index).clone();
        let kind = node.input_type().unwrap_or_default();
        if node.tag == "input" && kind == "checkbox" {
            let page = self.page.as_mut().expect("page loaded");
            if !page.checked.remove(&index) {
                page.checked.insert(index);
            }
        } else if node.tag == "input" && kind == "radio" {
            let group = node.attr("name").map(str::to_string);
            let same_group: Vec<usize> = self
                .loaded()?
                .model
                .elements
                .iter()
                .filter(|n| n.tag == "input" && group.is_some() && n.attr("name") == group.as_deref())
                .filter_map(|n| n.element_id.index())
                .collect();
            let page = self.page.as_mut().expect("page loaded");
            for other in same_group {
                page.checked.remove(&other);
            }
            page.checked.insert(index);
        } else if node.is_submit_control() {
            if let Some(form) = self.form_of(index) {
                return self.submit(form, Some(index), timeout_ms);
            }
        } else if node.tag == "option" {
            if let Some(select) = self.parent_of(index).filter(|p| self.node(*p).tag == "select") {
                let value = self.option_value(index);
                self.page.as_mut().expect("page loaded").selected.insert(select, value);
            }
        } else if let Some(href) = node.attr("href").filter(|_| node.tag == "a" || node.tag == "area") {
            let href = href.trim();
            if !href.is_empty() && !href.starts_with('#') && !href.starts_with("javascript:") {
                let url = self.resolve(href)?;
                return self.request(HttpRequest::get(url), timeout_ms);
            }
        }
        self.tick(ACTION_MS);
        Ok(())
    }

    fn rendered_text(&self, index: usize) -> String {
        let node = self.node(index);
        if node.tag == "title" {
            return self.loaded().map(|p| p.model.title.clone()).unwrap_or_default();
        }
        if node.visible { node.text.clone() } else { String::new() }
    }
}

fn payload<'a>(command: &'a ActionCommand) -> Result<&'a str, StepError> {
    command
        .payload
        .as_deref()
        .ok_or_else(|| StepError::Other(format!("{} needs a payload", command.verb)))
}

fn locator(command: &ActionCommand) -> Result<&str, StepError> {
    command
        .resolved_locator
        .as_deref()
        .ok_or_else(|| StepError::Other(format!("{} needs a locator", command.verb)))
}

impl Session for SimulatedSession {
    fn describe(&self) -> String {
        format!("simulated:{}", self.label)
    }

    fn now(&self) -> DateTime<Utc> {
        self.epoch + Duration::milliseconds(self.clock_ms as i64)
    }

    fn execute(&mut self, command: &ActionCommand) -> Result<(), StepError> {
        let timeout = command.timeout_ms;
        match command.verb {
            Verb::Navigate => {
                let url = payload(command)?.to_string();
                self.request(HttpRequest::get(url), timeout)
            }
            Verb::AssertUrl => {
                self.tick(ASSERT_MS);
                let expected = payload(command)?;
                let current = self.loaded()?.url.clone();
                let same = normalize_url(expected, &current).ok() == normalize_url(&current, &current).ok();
                if same {
                    Ok(())
                } else {
                    Err(StepError::AssertionFailed(format!("expected URL {expected}, at {current}")))
                }
            }
            Verb::Wait if command.resolved_locator.is_none() => {
                let ms = command.payload.as_deref().and_then(|p| p.trim().parse().ok()).unwrap_or(DEFAULT_WAIT_MS);
                self.tick(ms);
                Ok(())
            }
            Verb::Wait => {
                let loc = locator(command)?;
                self.find(loc, timeout)?;
                self.tick(ASSERT_MS);
                Ok(())
            }
            Verb::Click => {
                let loc = locator(command)?;
                let index = self.find(loc, timeout)?;
                self.require_interactable(index, loc)?;
                self.click(index, timeout)
            }
            Verb::Type | Verb::Clear => {
                let loc = locator(command)?;
                let index = self.find(loc, timeout)?;
                self.require_interactable(index, loc)?;
                let node = self.node(index);
                let editable = node.tag == "textarea"
                    || (node.tag == "input"
                        && !matches!(
                            node.input_type().as_deref(),
                            Some("submit" | "button" | "reset" | "image" | "checkbox" | "radio" | "hidden")
                        ));
                if !editable {
                    return Err(StepError::NotInteractable(format!("{loc} does not accept text")));
                }
                let max = node.attr("maxlength").and_then(|m| m.trim().parse::<usize>().ok());
                let mut value = if command.verb == Verb::Clear { String::new() } else { self.value_of(index) };
                if command.verb == Verb::Type {
                    value.push_str(payload(command)?);
                }
                if let Some(max) = max {
                    // browsers stop accepting keystrokes at maxlength
                    value = value.chars().take(max).collect();
                }
                self.page.as_mut().expect("page loaded").values.insert(index, value);
                self.tick(ACTION_MS);
                Ok(())
            }
            Verb::Select => {
                let loc = locator(command)?;
                let index = self.find(loc, timeout)?;
                self.require_interactable(index, loc)?;
                let wanted = payload(command)?;
                let option = self
                    .options(index)
                    .into_iter()
                    .find(|o| self.option_value(*o) == wanted || self.node(*o).text == wanted)
                    .ok_or_else(|| StepError::ElementNotFound(format!("option \"{wanted}\" in {loc}")))?;
                let value = self.option_value(option);
                self.page.as_mut().expect("page loaded").selected.insert(index, value);
                self.tick(ACTION_MS);
                Ok(())
            }
            Verb::AssertText => {
                let loc = locator(command)?;
                let index = self.find(loc, timeout)?;
                self.tick(ASSERT_MS);
                let expected = payload(command)?.trim();
                let text = self.rendered_text(index);
                if text.contains(expected) {
                    Ok(())
                } else {
                    Err(StepError::AssertionFailed(format!("expected \"{expected}\" in {loc}, found \"{text}\"")))
                }
            }
            Verb::AssertVisible => {
                let loc = locator(command)?;
                let index = self.find(loc, timeout)?;
                self.tick(ASSERT_MS);
                if self.node(index).visible {
                    Ok(())
                } else {
                    Err(StepError::AssertionFailed(format!("{loc} is not visible")))
                }
            }
        }
    }

    fn reset(&mut self) -> Result<(), StepError> {
        self.page = None;
        Ok(())
    }

    /// No layout engine: visible elements are stacked one row each in
    /// document order.
    fn geometry(&mut self, locator: &str) -> Option<Geometry> {
        let page = self.page.as_ref()?;
        let node = *page.model.query(locator).ok()?.first()?;
        if !node.visible {
            return None;
        }
        let row = page.model.elements[..node.element_id.index()?].iter().filter(|n| n.visible).count();
        Some(Geometry { x: 0.0, y: row as f64 * ROW_HEIGHT, width: 320.0, height: ROW_HEIGHT })
    }

    fn screenshot(&mut self) -> Option<Vec<u8>> {
        None
    }
}
