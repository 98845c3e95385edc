//! Python bindings: hermetic fixture runs, required-type derivation and
//! constraint-driven test data.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qeflow::canonical::to_canonical_json;
use qeflow::data::{ConstraintKind, FieldConstraint, Scenario};
use qeflow::fixtures::{FailureProfile, FixtureApp};
use qeflow::pipeline::{Pipeline, PipelineConfig, PipelineError};
use qeflow::report::{Metrics, Report};
use qeflow::testgen::derive_required_types;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_error(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn report_json(report: &Report) -> PyResult<String> {
    to_canonical_json(report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs every phase against a bundled fixture and returns `report.json`.
/// The failure profile defaults to the application's own.
#[pyfunction]
#[pyo3(signature = (app, out_dir, failure_profile=None))]
fn run_fixture(app: &str, out_dir: PathBuf, failure_profile: Option<&str>) -> PyResult<String> {
    let app: FixtureApp = app.parse().map_err(value_error)?;
    let profile = match failure_profile {
        Some(p) => p.parse::<FailureProfile>().map_err(value_error)?,
        None => app.failure_profile(),
    };
    let pipeline = Pipeline::new(&PipelineConfig::for_fixture(app, profile, out_dir)).map_err(pipeline_error)?;
    report_json(&pipeline.run().map_err(pipeline_error)?)
}

/// Runs every phase for a TOML configuration and returns `report.json`.
#[pyfunction]
fn run_config(config_toml: &str) -> PyResult<String> {
    let config = PipelineConfig::from_toml(config_toml).map_err(value_error)?;
    let pipeline = Pipeline::new(&config).map_err(pipeline_error)?;
    report_json(&pipeline.run().map_err(pipeline_error)?)
}

/// `(predefined, extracted, required)` test types for an instruction.
#[pyfunction]
fn required_types(instruction: &str) -> (Vec<String>, Vec<String>, Vec<String>) {
    let r = derive_required_types(instruction);
    let names = |set: &std::collections::BTreeSet<_>| set.iter().map(ToString::to_string).collect();
    (names(&r.predefined), names(&r.extracted), names(&r.required))
}

/// A value for a field of `kind`; returns `(value, violated_rule or None)`.
#[pyfunction]
#[pyo3(signature = (kind, scenario="valid", seed=0, required=true, min_length=None, max_length=None, pattern=None))]
fn synthesize_value(
    kind: &str,
    scenario: &str,
    seed: u64,
    required: bool,
    min_length: Option<usize>,
    max_length: Option<usize>,
    pattern: Option<String>,
) -> PyResult<(String, Option<String>)> {
    let kind: ConstraintKind = serde_json::from_value(serde_json::Value::String(kind.to_ascii_lowercase()))
        .map_err(|_| value_error(format!("unknown constraint kind `{kind}`")))?;
    let mut c = FieldConstraint::new(kind);
    c.required = required;
    c.min_length = min_length;
    c.max_length = max_length;
    c.pattern = pattern;
    let scenario: Scenario = scenario.parse().map_err(value_error)?;
    let out = qeflow::data::synthesize_value(&c, &scenario, seed).map_err(value_error)?;
    Ok((out.value, out.violated.map(|r| r.to_string())))
}

/// Success rate as a two-decimal percentage string, `None` when nothing ran.
#[pyfunction]
fn success_rate(total: usize, passed: usize) -> Option<String> {
    Metrics::from_counts(total, passed).success_rate_percent.map(|p| p.to_string())
}

#[pymodule]
fn qeflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(required_types, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_value, m)?)?;
    m.add_function(wrap_pyfunction!(success_rate, m)?)?;
    Ok(())
}
