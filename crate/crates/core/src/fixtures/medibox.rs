//! Signup flow reconstructed from the published description of MediBox:
//! a home page, a five-field signup form (full name, contact number, email,
//! password, confirmation) with uniqueness checks, and a sign-in page. The
//! real deployment is private; field rules below are assumptions.

use std::sync::LazyLock;

use regex::Regex;

use super::{escape, FailureProfile, FixtureReply, FixtureRequest, FixtureState, INJECTED_DELAY_MS};
use crate::data::EMAIL_FORMAT;
use crate::exec::Method;
use crate::testgen::Priority;

/// (email, mobile, password) registered before every run.
pub(super) const SEEDED_ACCOUNTS: [(&str, &str, &str); 1] =
    [("registered.user@medibox.test", "0412345678", "Existing#2024")];

pub const MOBILE_PATTERN: &str = "0[0-9]{9}";
const NAME_MAX: usize = 50;
const EMAIL_MAX: usize = 100;
const PASSWORD_MIN: usize = 8;
const PASSWORD_CLASSES: usize = 3;

static NAME_FORMAT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{L}[\p{L} '.\-]*$").unwrap());
static EMAIL: LazyLock<Regex> = LazyLock::new(|| Regex::new(EMAIL_FORMAT).unwrap());
static MOBILE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("^(?:{MOBILE_PATTERN})$")).unwrap());

pub(super) const TABLE: &[(&str, &str, Priority)] = &[
    ("TC01", "Verify navigation to User Signup page", Priority::High),
    ("TC02", "Verify unique mobile number registration", Priority::High),
    ("TC03", "Verify unique email address registration", Priority::High),
    ("TC04", "Verify password and confirm password match", Priority::High),
    ("TC05", "Verify required fields on User Signup form", Priority::High),
    ("TC06", "Verify successful user registration", Priority::High),
    ("TC07", "Verify password strength requirement", Priority::Medium),
    ("TC08", "Verify email address format validation", Priority::High),
    ("TC09", "Verify mobile number format validation", Priority::Medium),
    ("TC10", "Verify navigation to Sign In page after registration", Priority::High),
];

fn shell(title: &str, profile: FailureProfile, main: &str) -> String {
    // the broken build renders the signup link under an inert overlay
    let inert = if profile == FailureProfile::Medibox { " inert" } else { "" };
    format!(
        r#"<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>{title}</title></head>
<body>
<header id="site-header">
<nav id="main-nav" aria-label="Main">
<a id="home-link" href="/">MediBox</a>
<a id="signin-nav" href="/SignIn">Sign In</a>
<a id="signup-link" href="/UserSignup"{inert}>Sign Up</a>
</nav>
</header>
<main id="content">
{main}</main>
<footer id="site-footer"><p>MediBox health records</p></footer>
</body>
</html>
"#
    )
}

fn home_page(profile: FailureProfile) -> String {
    shell(
        "MediBox",
        profile,
        r#"<h1 id="home-title">Your health records in one place</h1>
<p id="home-intro">Book appointments, keep prescriptions and share results with your clinic.</p>
"#,
    )
}

#[derive(Default)]
struct Entered<'a> {
    full_name: &'a str,
    mobile: &'a str,
    email: &'a str,
}

fn signup_page(profile: FailureProfile, entered: &Entered<'_>, errors: &[&str]) -> String {
    let messages: String = errors.iter().map(|e| format!("<p class=\"form-error\">{}</p>", escape(e))).collect();
    let form = format!(
        r#"<h1 id="signup-title">Create your account</h1>
<form id="signup-form" action="/UserSignup" method="post" novalidate>
<label for="fullName">Full name</label>
<input id="fullName" name="fullName" type="text" required minlength="2" maxlength="{NAME_MAX}" autocomplete="name" value="{}">
<label for="mobile">Mobile number</label>
<input id="mobile" name="mobile" type="tel" required pattern="{MOBILE_PATTERN}" maxlength="10" autocomplete="tel" value="{}">
<label for="email">Email address</label>
<input id="email" name="email" type="email" required maxlength="{EMAIL_MAX}" autocomplete="email" value="{}">
<label for="password">Password</label>
<input id="password" name="password" type="password" required minlength="{PASSWORD_MIN}" autocomplete="new-password">
<label for="confirmPassword">Confirm password</label>
<input id="confirmPassword" name="confirmPassword" type="password" required autocomplete="new-password">
<div id="form-errors" role="alert">{messages}</div>
<button id="signup-button" type="submit">Sign Up</button>
</form>
<p id="signin-prompt">Already registered? <a id="signin-link" href="/SignIn">Sign in</a></p>
"#,
        escape(entered.full_name),
        escape(entered.mobile),
        escape(entered.email)
    );
    shell("User Signup - MediBox", profile, &form)
}

fn signin_page(profile: FailureProfile, registered: bool) -> String {
    // the broken build ships the old heading
    let heading = if profile == FailureProfile::Medibox { "Log In" } else { "Sign In" };
    let notice = if registered {
        r#"<p id="signin-notice" role="status">Registration successful. Please sign in.</p>"#
    } else {
        r#"<p id="signin-notice" role="status" hidden></p>"#
    };
    let main = format!(
        r#"<h1 id="signin-title">{heading}</h1>
{notice}
<form id="signin-form" action="/SignIn" method="post">
<label for="signin-email">Email address</label>
<input id="signin-email" name="email" type="email" required autocomplete="username">
<label for="signin-password">Password</label>
<input id="signin-password" name="password" type="password" required autocomplete="current-password">
<button id="signin-button" type="submit">Sign In</button>
</form>
<p id="signup-prompt">New to MediBox? <a id="register-link" href="/UserSignup">Create an account</a></p>
"#
    );
    shell(&format!("{heading} - MediBox"), profile, &main)
}

fn classes(value: &str) -> usize {
    let lower = value.chars().any(char::is_lowercase);
    let upper = value.chars().any(char::is_uppercase);
    let digit = value.chars().any(|c| c.is_ascii_digit());
    let other = value.chars().any(|c| !c.is_alphanumeric());
    [lower, upper, digit, other].into_iter().filter(|b| *b).count()
}

/// Server-side checks in display order: missing fields, then formats, then
/// the password pair, and uniqueness only once everything else holds.
fn signup_errors(request: &FixtureRequest, state: &FixtureState) -> Vec<&'static str> {
    let name = request.field("fullName").trim();
    let mobile = request.field("mobile").trim();
    let email = request.field("email").trim();
    let password = request.field("password");
    let confirm = request.field("confirmPassword");
    let mut errors = Vec::new();
    let required = [
        (name, "Full name is required"),
        (mobile, "Mobile number is required"),
        (email, "Email address is required"),
        (password, "Password is required"),
        (confirm, "Please confirm your password"),
    ];
    for (value, message) in required {
        if value.is_empty() {
            errors.push(message);
        }
    }
    let length = name.chars().count();
    if !name.is_empty() && (!NAME_FORMAT.is_match(name) || !(2..=NAME_MAX).contains(&length)) {
        errors.push("Enter your full name using letters only");
    }
    if !email.is_empty() && (!EMAIL.is_match(email) || email.chars().count() > EMAIL_MAX) {
        errors.push("Enter a valid email address");
    }
    if !mobile.is_empty() && !MOBILE.is_match(mobile) {
        errors.push("Enter a valid 10-digit mobile number");
    }
    if !password.is_empty() && (password.chars().count() < PASSWORD_MIN || classes(password) < PASSWORD_CLASSES) {
        errors.push("Password must be at least 8 characters and mix upper case, lower case, digits or symbols");
    }
    if !password.is_empty() && !confirm.is_empty() && password != confirm {
        errors.push("Passwords do not match");
    }
    if errors.is_empty() {
        if state.mobiles.contains(mobile) {
            errors.push("Mobile number is already registered");
        }
        if state.emails.contains(&email.to_lowercase()) {
            errors.push("Email address is already registered");
        }
    }
    errors
}

pub(super) fn handle(profile: FailureProfile, state: &mut FixtureState, request: &FixtureRequest) -> FixtureReply {
    match (request.method, request.path.as_str()) {
        (Method::Get, "/") => FixtureReply::page(home_page(profile)),
        (Method::Get, "/UserSignup") => FixtureReply::page(signup_page(profile, &Entered::default(), &[])),
        (Method::Post, "/UserSignup") => {
            let errors = signup_errors(request, state);
            if !errors.is_empty() {
                let entered = Entered {
                    full_name: request.field("fullName"),
                    mobile: request.field("mobile"),
                    email: request.field("email"),
                };
                return FixtureReply::page(signup_page(profile, &entered, &errors));
            }
            let email = request.field("email").trim().to_lowercase();
            state.mobiles.insert(request.field("mobile").trim().to_string());
            state.passwords.insert(email.clone(), request.field("password").to_string());
            state.emails.insert(email);
            let reply = FixtureReply::redirect("/SignIn?registered=1");
            if profile == FailureProfile::Medibox {
                reply.delayed(INJECTED_DELAY_MS)
            } else {
                reply
            }
        }
        (Method::Get, "/SignIn") => FixtureReply::page(signin_page(profile, request.param("registered") == Some("1"))),
        (Method::Post, "/SignIn") => {
            let email = request.field("email").trim().to_lowercase();
            if state.passwords.get(&email).is_some_and(|p| p == request.field("password")) {
                FixtureReply::redirect("/")
            } else {
                FixtureReply::page(signin_page(profile, false))
            }
        }
        _ => FixtureReply::not_found(&request.path),
    }
}
