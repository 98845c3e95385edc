//! The model stand-in whose replies are recorded as the bundled replay
//! transcripts. It answers generation prompts with the published suites,
//! resolving locators to element ids through the site representation the
//! prompts were built from, and leaves every other template to the rule
//! mock.

use serde_json::{json, Value};

use super::FixtureApp;
use crate::llm::{template_of, Backend, ChatMessage, LlmError, Role, RuleMockBackend, DEFAULT_CONTEXT_LIMIT};
use crate::site::SiteRepresentation;

pub struct ScriptedBackend {
    app: FixtureApp,
    site: SiteRepresentation,
    fallback: RuleMockBackend,
}

impl ScriptedBackend {
    pub fn new(app: FixtureApp, site: SiteRepresentation) -> Self {
        Self { app, site, fallback: RuleMockBackend }
    }
}

/// Builds one page's drafts; ids are looked up by locator.
struct Page<'a> {
    site: &'a SiteRepresentation,
    target: String,
    missing: Vec<String>,
}

struct Step(Value);

impl Page<'_> {
    fn url(&self, path: &str) -> String {
        self.site.resolve_url(path).unwrap_or_else(|| path.to_string())
    }

    fn id(&mut self, path: &str, locator: &str) -> String {
        let url = self.url(path);
        let found = self
            .site
            .page(&url)
            .and_then(|p| p.element_digests.iter().find(|e| e.locator == locator))
            .map(|e| e.element_id.to_string());
        found.unwrap_or_else(|| {
            self.missing.push(format!("{locator} on {url}"));
            String::new()
        })
    }

    fn here(&mut self, locator: &str) -> String {
        let target = self.target.clone();
        self.id(&target, locator)
    }

    fn open(&self) -> Step {
        Step(json!({"verb": "navigate", "target": self.target}))
    }

    fn click(&mut self, locator: &str) -> Step {
        Step(json!({"verb": "click", "target": self.here(locator)}))
    }

    fn type_text(&mut self, locator: &str, text: &str) -> Step {
        Step(json!({"verb": "type", "target": self.here(locator), "argument": text}))
    }

    fn type_slot(&mut self, locator: &str, slot: &str) -> Step {
        self.type_text(locator, &format!("slot:{slot}"))
    }

    fn assert_text(&mut self, locator: &str, text: &str) -> Step {
        Step(json!({"verb": "assert_text", "target": self.here(locator), "argument": text}))
    }

    fn assert_text_on(&mut self, path: &str, locator: &str, text: &str) -> Step {
        let page = self.url(path);
        Step(json!({"verb": "assert_text", "target": self.id(path, locator), "argument": text, "page": page}))
    }

    fn assert_visible(&mut self, locator: &str) -> Step {
        Step(json!({"verb": "assert_visible", "target": self.here(locator)}))
    }

    fn assert_url(&mut self, path: &str) -> Step {
        Step(json!({"verb": "assert_url", "target": self.url(path)}))
    }

    fn slot(&mut self, locator: &str, slot: &str, scenario: &str) -> Value {
        json!({"element_id": self.here(locator), "slot": slot, "scenario": scenario})
    }

    #[allow(clippy::too_many_arguments)]
    fn case(
        &self,
        name: &str,
        priority: &str,
        test_type: &str,
        description: &str,
        steps: Vec<Step>,
        expected: &str,
        slots: Vec<Value>,
    ) -> Value {
        json!({
            "name": name,
            "priority": priority,
            "description": description,
            "test_type": test_type,
            "target_page": self.target,
            "steps": steps.into_iter().map(|s| s.0).collect::<Vec<_>>(),
            "expected": [expected],
            "data_slots": slots,
        })
    }
}

const USER: &str = "#user-name";
const PASS: &str = "#password";
const LOGIN: &str = "#login-button";
const ERROR: &str = "#login-error";

fn swag_login(p: &mut Page<'_>) -> Vec<Value> {
    let mut cases = Vec::new();
    let credentials = |p: &mut Page<'_>, user: &str, pass: &str| {
        vec![p.type_text(USER, user), p.type_text(PASS, pass), p.click(LOGIN)]
    };

    let mut steps = vec![p.type_slot(USER, "username"), p.type_slot(PASS, "password"), p.click(LOGIN)];
    steps.push(p.assert_url("/inventory.html"));
    let slots = vec![p.slot(USER, "username", "valid"), p.slot(PASS, "password", "valid")];
    cases.push(p.case(
        "Login with valid credentials",
        "High",
        "authentication",
        "Test login functionality using valid username/password.",
        steps,
        "The products inventory opens",
        slots,
    ));

    let mut steps = vec![p.type_slot(USER, "invalid_username"), p.type_slot(PASS, "password"), p.click(LOGIN)];
    steps.push(p.assert_text(ERROR, "do not match"));
    let slots = vec![p.slot(USER, "invalid_username", "valid"), p.slot(PASS, "password", "valid")];
    cases.push(p.case(
        "Login with invalid username",
        "High",
        "error_handling",
        "Test login with invalid username and valid password.",
        steps,
        "A credentials mismatch error is shown",
        slots,
    ));

    let mut steps = vec![p.type_slot(USER, "username"), p.type_slot(PASS, "invalid_password"), p.click(LOGIN)];
    steps.push(p.assert_text(ERROR, "do not match"));
    let slots = vec![p.slot(USER, "username", "valid"), p.slot(PASS, "invalid_password", "valid")];
    cases.push(p.case(
        "Login with invalid password",
        "High",
        "error_handling",
        "Test login with valid username and invalid password.",
        steps,
        "A credentials mismatch error is shown",
        slots,
    ));

    let steps = vec![p.type_text(PASS, "secret_sauce"), p.click(LOGIN), p.assert_text(ERROR, "Username is required")];
    cases.push(p.case(
        "Login with empty username",
        "Medium",
        "field_validation",
        "Validate login error when username is empty.",
        steps,
        "The username is reported as required",
        Vec::new(),
    ));

    let steps = vec![p.type_text(USER, "standard_user"), p.click(LOGIN), p.assert_text(ERROR, "Password is required")];
    cases.push(p.case(
        "Login with empty password",
        "Medium",
        "field_validation",
        "Validate login error when password is empty.",
        steps,
        "The password is reported as required",
        Vec::new(),
    ));

    let mut steps = credentials(p, "locked_out_user", "secret_sauce");
    steps.push(p.assert_text(ERROR, "locked out"));
    cases.push(p.case(
        "Login with locked-out user",
        "Low",
        "error_handling",
        "Test locked-out user credentials return proper error.",
        steps,
        "A locked-out error is shown",
        Vec::new(),
    ));

    let mut steps = credentials(p, "performance_glitch_user", "secret_sauce");
    steps.push(p.assert_url("/inventory.html"));
    cases.push(p.case(
        "Login with performance glitch user",
        "Medium",
        "performance",
        "Test login using performance_glitch_user.",
        steps,
        "The inventory opens within the step timeout",
        Vec::new(),
    ));

    let steps = vec![p.click(LOGIN), p.assert_text(ERROR, "Username is required")];
    cases.push(p.case(
        "Login with all fields empty",
        "Low",
        "field_validation",
        "Validate error messages for empty username/password.",
        steps,
        "The first missing field is reported",
        Vec::new(),
    ));

    let mut steps = vec![p.type_slot(USER, "random_username"), p.type_slot(PASS, "random_password"), p.click(LOGIN)];
    steps.push(p.assert_visible(ERROR));
    steps.push(p.assert_text(ERROR, "do not match"));
    let slots = vec![p.slot(USER, "random_username", "valid"), p.slot(PASS, "random_password", "valid")];
    cases.push(p.case(
        "Verify error message for invalid input",
        "Medium",
        "error_handling",
        "Validate error message when credentials are invalid.",
        steps,
        "The error container shows the mismatch message",
        slots,
    ));

    let mut steps = credentials(p, "problem_user", "secret_sauce");
    steps.push(p.assert_text_on("/inventory.html", "#inventory-title", "Products"));
    cases.push(p.case(
        "Login with problem user",
        "Low",
        "authentication",
        "Test login using problem_user and validate issues.",
        steps,
        "The products page loads for the problem user",
        Vec::new(),
    ));
    cases
}

fn medibox_home(p: &mut Page<'_>) -> Vec<Value> {
    let steps = vec![p.click("#signup-link"), p.assert_url("/UserSignup")];
    vec![p.case(
        "Verify navigation to User Signup page",
        "High",
        "navigation",
        "Check if the User Signup page is navigable from the homepage.",
        steps,
        "The User Signup page opens",
        Vec::new(),
    )]
}

const FIELDS: [(&str, &str); 5] = [
    ("#fullName", "fullname"),
    ("#mobile", "mobile"),
    ("#email", "email"),
    ("#password", "password"),
    ("#confirmPassword", "confirm_password"),
];
const SIGNUP: &str = "#signup-button";
const FORM_ERRORS: &str = "#form-errors";

/// Types every field from its slot and submits; `scenarios` overrides the
/// default scenario of named slots.
fn fill_and_submit(p: &mut Page<'_>, scenarios: &[(&str, &str)]) -> (Vec<Step>, Vec<Value>) {
    let mut steps = vec![p.open()];
    let mut slots = Vec::new();
    for (locator, slot) in FIELDS {
        let default = if slot == "confirm_password" { "match:password" } else { "valid" };
        let scenario = scenarios.iter().find(|(s, _)| *s == slot).map_or(default, |(_, sc)| *sc);
        steps.push(p.type_slot(locator, slot));
        slots.push(p.slot(locator, slot, scenario));
    }
    steps.push(p.click(SIGNUP));
    (steps, slots)
}

fn medibox_signup(p: &mut Page<'_>) -> Vec<Value> {
    let mut cases = Vec::new();
    let rejected = |p: &mut Page<'_>, scenarios: &[(&str, &str)], message: &str| {
        let (mut steps, slots) = fill_and_submit(p, scenarios);
        steps.push(p.assert_text(FORM_ERRORS, message));
        (steps, slots)
    };

    let (steps, slots) = rejected(p, &[], "Mobile number is already registered");
    cases.push(p.case(
        "Verify unique mobile number registration",
        "High",
        "data_consistency",
        "Ensure that the mobile number is unique for each user during the registration process.",
        steps,
        "Registration with a registered mobile number is refused",
        slots,
    ));
    let (steps, slots) = rejected(p, &[], "Email address is already registered");
    cases.push(p.case(
        "Verify unique email address registration",
        "High",
        "data_consistency",
        "Validate that the email address is unique for each user during registration.",
        steps,
        "Registration with a registered email address is refused",
        slots,
    ));
    let (steps, slots) = rejected(p, &[("confirm_password", "mismatch:password")], "Passwords do not match");
    cases.push(p.case(
        "Verify password and confirm password match",
        "High",
        "data_consistency",
        "Check if the password and confirm password fields match before form submission.",
        steps,
        "Mismatched passwords are refused",
        slots,
    ));

    let steps = vec![p.open(), p.click(SIGNUP), p.assert_text(FORM_ERRORS, "is required")];
    cases.push(p.case(
        "Verify required fields on User Signup form",
        "High",
        "field_validation",
        "Test if Email field accepts valid input.",
        steps,
        "Every empty required field is reported",
        Vec::new(),
    ));

    let (mut steps, slots) = fill_and_submit(p, &[]);
    steps.push(p.assert_text_on("/SignIn", "#signin-notice", "Registration successful"));
    cases.push(p.case(
        "Verify successful user registration",
        "High",
        "functional",
        "Ensure all required fields must be filled before form submission.",
        steps,
        "The account is created and the sign-in page confirms it",
        slots,
    ));

    let (steps, slots) = rejected(
        p,
        &[("password", "invalid:classes")],
        "Password must be at least 8 characters",
    );
    cases.push(p.case(
        "Verify password strength requirement",
        "Medium",
        "field_validation",
        "Ensure the password meets the required strength criteria.",
        steps,
        "A weak password is refused",
        slots,
    ));
    let (steps, slots) = rejected(p, &[("email", "invalid:format")], "Enter a valid email address");
    cases.push(p.case(
        "Verify email address format validation",
        "High",
        "field_validation",
        "Check if the email address entered follows the correct format.",
        steps,
        "A malformed email address is refused",
        slots,
    ));
    let (steps, slots) = rejected(p, &[("mobile", "invalid:pattern")], "Enter a valid 10-digit mobile number");
    cases.push(p.case(
        "Verify mobile number format validation",
        "Medium",
        "field_validation",
        "Check if the mobile number entered follows the correct format.",
        steps,
        "A malformed mobile number is refused",
        slots,
    ));

    let steps = vec![p.open(), p.click("#signin-link"), p.assert_text_on("/SignIn", "#signin-title", "Sign In")];
    cases.push(p.case(
        "Verify navigation to Sign In page after registration",
        "High",
        "navigation",
        "Check if the user can navigate to the Sign In page after registration.",
        steps,
        "The Sign In page opens with its heading",
        Vec::new(),
    ));
    cases
}

fn field<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

impl ScriptedBackend {
    fn generation_reply(&self, prompt: &str) -> Result<String, LlmError> {
        let Some(target) = field(prompt, "TARGET PAGE ") else {
            return Ok(json!({"cases": []}).to_string());
        };
        // a page split over several chunks gets its cases with the first
        let first_chunk = field(prompt, "CHUNK ").is_none_or(|id| {
            self.site.chunk_plan.iter().find(|c| c.scope.page_url == target).is_none_or(|c| c.chunk_id == id)
        });
        let path = url::Url::parse(target).map(|u| u.path().to_string()).unwrap_or_default();
        let mut page = Page { site: &self.site, target: target.to_string(), missing: Vec::new() };
        let cases = match (self.app, path.as_str(), first_chunk) {
            (_, _, false) => Vec::new(),
            (FixtureApp::Swag, "/", _) => swag_login(&mut page),
            (FixtureApp::Medibox, "/", _) => medibox_home(&mut page),
            (FixtureApp::Medibox, "/UserSignup", _) => medibox_signup(&mut page),
            _ => Vec::new(),
        };
        if !page.missing.is_empty() {
            return Err(LlmError::BackendUnavailable(format!(
                "scripted {} suite cannot resolve {}",
                self.app,
                page.missing.join(", ")
            )));
        }
        Ok(json!({ "cases": cases }).to_string())
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> String {
        format!("scripted:{}", self.app)
    }

    fn context_limit(&self) -> usize {
        DEFAULT_CONTEXT_LIMIT
    }

    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let prompt = messages.iter().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str());
        match template_of(prompt) {
            Some("testgen.v1") => self.generation_reply(prompt),
            _ => self.fallback.send(messages),
        }
    }
}
