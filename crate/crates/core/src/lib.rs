//! Hierarchical web application representation for LLM-driven quality engineering.
//!
//! The pipeline runs in five phases, each backed by a module here:
//!
//! 1. [`crawler`] and [`dom`] capture pages and turn them into element trees.
//! 2. [`site`] fuses page models into a [`site::SiteRepresentation`] with URL
//!    patterns, navigation priorities and a context-budgeted chunk plan.
//! 3. [`testgen`] prompts a language model through [`llm`] page by page and
//!    validates what comes back into a [`testgen::TestSuite`].
//! 4. [`data`] binds or synthesizes test data and [`exec`] runs the suite
//!    against a WebDriver endpoint or the built-in simulated session.
//! 5. [`report`] computes metrics, categorizes failures and renders reports.
//!
//! [`pipeline`] wires the phases together around an artifact directory and
//! [`fixtures`] ships the hermetic fixture applications used by the tests.

pub mod canonical;
pub mod crawler;
pub mod data;
pub mod dom;
pub mod exec;
pub mod fixtures;
pub mod llm;
pub mod pipeline;
pub mod report;
pub mod site;
pub mod testgen;

/// Rough token count used everywhere a prompt or chunk is sized: one token
/// per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}
