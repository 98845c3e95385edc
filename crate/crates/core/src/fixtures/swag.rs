//! Login flow modeled on the public Swag Labs demo. Markup keeps the demo's
//! ids and `data-test` hooks; every element a suite touches carries an id
//! so its locator does not depend on the error state.

use super::{escape, FailureProfile, FixtureReply, FixtureRequest, INJECTED_DELAY_MS};
use crate::exec::Method;
use crate::testgen::Priority;

pub const PASSWORD: &str = "secret_sauce";
pub const USERS: [&str; 6] = [
    "standard_user",
    "locked_out_user",
    "problem_user",
    "performance_glitch_user",
    "error_user",
    "visual_user",
];
const LOCKED_OUT: &str = "locked_out_user";
const GLITCH: &str = "performance_glitch_user";

const ERRORS: [(&str, &str); 4] = [
    ("username_required", "Epic sadface: Username is required"),
    ("password_required", "Epic sadface: Password is required"),
    ("locked_out", "Epic sadface: Sorry, this user has been locked out."),
    ("mismatch", "Epic sadface: Username and password do not match any user in this service"),
];

const PRODUCTS: [(&str, &str); 6] = [
    ("Sauce Labs Backpack", "29.99"),
    ("Sauce Labs Bike Light", "9.99"),
    ("Sauce Labs Bolt T-Shirt", "15.99"),
    ("Sauce Labs Fleece Jacket", "49.99"),
    ("Sauce Labs Onesie", "7.99"),
    ("Test.allTheThings() T-Shirt (Red)", "15.99"),
];

pub(super) const TABLE: &[(&str, &str, Priority)] = &[
    ("TC01", "Login with valid credentials", Priority::High),
    ("TC02", "Login with invalid username", Priority::High),
    ("TC03", "Login with invalid password", Priority::High),
    ("TC04", "Login with empty username", Priority::Medium),
    ("TC05", "Login with empty password", Priority::Medium),
    ("TC06", "Login with locked-out user", Priority::Low),
    ("TC07", "Login with performance glitch user", Priority::Medium),
    ("TC08", "Login with all fields empty", Priority::Low),
    ("TC09", "Verify error message for invalid input", Priority::Medium),
    ("TC10", "Login with problem user", Priority::Low),
];

fn login_page(error: Option<&str>) -> String {
    let (error_attr, error_text) = match error {
        Some(message) => ("", escape(message)),
        None => (" hidden", String::new()),
    };
    let users: String = USERS.iter().map(|u| format!("{u}<br>")).collect();
    format!(
        r#"<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>Swag Labs</title></head>
<body>
<div class="login_logo" id="login-logo">Swag Labs</div>
<div class="login_wrapper" id="login-wrapper">
<form id="login-form" action="/inventory.html" method="post" novalidate>
<input class="input_error form_input" placeholder="Username" type="text" data-test="username" id="user-name" name="user-name" autocorrect="off" autocapitalize="none">
<input class="input_error form_input" placeholder="Password" type="password" data-test="password" id="password" name="password" autocorrect="off" autocapitalize="none">
<div class="error-message-container error" id="error-container"><h3 data-test="error" id="login-error"{error_attr}>{error_text}</h3></div>
<input type="submit" class="submit-button btn_action" data-test="login-button" id="login-button" name="login-button" value="Login">
</form>
</div>
<div class="login_credentials_wrap" id="login-credentials">
<div class="login_credentials" data-test="login-credentials"><h4>Accepted usernames are:</h4>{users}</div>
<div class="login_password" data-test="login-password"><h4>Password for all users:</h4>{PASSWORD}</div>
</div>
</body>
</html>
"#
    )
}

fn inventory_page() -> String {
    let items: String = PRODUCTS
        .iter()
        .enumerate()
        .map(|(i, (name, price))| {
            format!(
                r#"<div class="inventory_item" data-test="inventory-item"><a href="/inventory-item.html?id={i}" id="item_{i}_title_link" data-test="item-{i}-title-link"><div class="inventory_item_name">{}</div></a><div class="inventory_item_price">${price}</div></div>
"#,
                escape(name)
            )
        })
        .collect();
    format!(
        r#"<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>Swag Labs</title></head>
<body>
<div class="primary_header" id="header">
<nav class="bm-item-list" id="menu">
<a id="inventory_sidebar_link" href="/inventory.html">All Items</a>
<a id="about_sidebar_link" href="/about.html">About</a>
<a id="logout_sidebar_link" href="/">Logout</a>
</nav>
<div class="app_logo">Swag Labs</div>
<a class="shopping_cart_link" data-test="shopping-cart-link" id="shopping_cart_container" href="/cart.html">Cart</a>
</div>
<div class="header_secondary_container"><span class="title" data-test="title" id="inventory-title">Products</span></div>
<div class="inventory_list" id="inventory-list">
{items}</div>
</body>
</html>
"#
    )
}

/// Which message a login attempt earns, or `None` when it succeeds.
fn login_error(username: &str, password: &str) -> Option<&'static str> {
    if username.is_empty() {
        Some("username_required")
    } else if password.is_empty() {
        Some("password_required")
    } else if !USERS.contains(&username) || password != PASSWORD {
        Some("mismatch")
    } else if username == LOCKED_OUT {
        Some("locked_out")
    } else {
        None
    }
}

pub(super) fn handle(profile: FailureProfile, request: &FixtureRequest) -> FixtureReply {
    match (request.method, request.path.as_str()) {
        (Method::Get, "/") => {
            let error = request
                .param("error")
                .and_then(|code| ERRORS.iter().find(|(c, _)| *c == code))
                .map(|(_, message)| *message);
            FixtureReply::page(login_page(error))
        }
        (Method::Post, "/inventory.html") => {
            let username = request.field("user-name");
            match login_error(username, request.field("password")) {
                Some(code) => FixtureReply::redirect(format!("/?error={code}")),
                None if profile == FailureProfile::Swag && username == GLITCH => {
                    FixtureReply::redirect("/inventory.html").delayed(INJECTED_DELAY_MS)
                }
                None => FixtureReply::redirect("/inventory.html"),
            }
        }
        // stateless: the inventory does not check for a login
        (Method::Get, "/inventory.html") => FixtureReply::page(inventory_page()),
        _ => FixtureReply::not_found(&request.path),
    }
}
