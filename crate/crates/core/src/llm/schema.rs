//! Response schemas. Validation here is about shape only; semantic checks
//! (known verbs, existing elements, ...) belong to the consumers.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    /// `{"cases": [{name, priority, description, test_type, target_page, steps, expected, data_slots?}]}`
    TestCaseBatch,
    /// `{"page_type": "<type>"}`
    PageType,
    /// `{"mappings": [{"slot": "...", "column": "..." | null}]}`
    DataMapping,
    /// Plain prose.
    FreeText,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::TestCaseBatch => "test_case_batch",
            SchemaId::PageType => "page_type",
            SchemaId::DataMapping => "data_mapping",
            SchemaId::FreeText => "free_text",
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pulls the JSON payload out of a reply, tolerating code fences and prose
/// around a single top-level object.
pub fn extract_json(schema: SchemaId, raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if schema == SchemaId::FreeText {
        return Ok(Value::String(trimmed.to_string()));
    }
    let unfenced = strip_fence(trimmed);
    if let Ok(value) = serde_json::from_str(unfenced) {
        return Ok(value);
    }
    match (unfenced.find('{'), unfenced.rfind('}')) {
        (Some(start), Some(end)) if start < end => serde_json::from_str(&unfenced[start..=end])
            .map_err(|e| format!("reply is not valid JSON: {e}")),
        _ => Err("reply contains no JSON object".into()),
    }
}

fn strip_fence(text: &str) -> &str {
    let Some(rest) = text.strip_prefix("```") else {
        return text;
    };
    let body = rest.split_once('\n').map_or("", |(_, body)| body);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

pub fn validate(schema: SchemaId, value: &Value) -> Result<(), String> {
    match schema {
        SchemaId::FreeText => match value.as_str() {
            Some(s) if !s.trim().is_empty() => Ok(()),
            _ => Err("expected non-empty text".into()),
        },
        SchemaId::PageType => {
            let obj = object(value, "reply")?;
            string_field(obj, "page_type", "reply")
        }
        SchemaId::DataMapping => {
            let obj = object(value, "reply")?;
            for (i, item) in array_field(obj, "mappings", "reply")?.iter().enumerate() {
                let ctx = format!("mappings[{i}]");
                let m = object(item, &ctx)?;
                string_field(m, "slot", &ctx)?;
                match m.get("column") {
                    None | Some(Value::Null) | Some(Value::String(_)) => {}
                    Some(_) => return Err(format!("{ctx}.column must be a string or null")),
                }
            }
            Ok(())
        }
        SchemaId::TestCaseBatch => {
            let obj = object(value, "reply")?;
            for (i, case) in array_field(obj, "cases", "reply")?.iter().enumerate() {
                validate_case(case, &format!("cases[{i}]"))?;
            }
            Ok(())
        }
    }
}

fn validate_case(case: &Value, ctx: &str) -> Result<(), String> {
    let obj = object(case, ctx)?;
    for field in ["name", "priority", "description", "test_type", "target_page"] {
        string_field(obj, field, ctx)?;
    }
    for (j, step) in array_field(obj, "steps", ctx)?.iter().enumerate() {
        let sctx = format!("{ctx}.steps[{j}]");
        let s = object(step, &sctx)?;
        string_field(s, "verb", &sctx)?;
        string_field(s, "target", &sctx)?;
        optional_string(s, "argument", &sctx)?;
        optional_string(s, "page", &sctx)?;
    }
    for (j, item) in array_field(obj, "expected", ctx)?.iter().enumerate() {
        if !item.is_string() {
            return Err(format!("{ctx}.expected[{j}] must be a string"));
        }
    }
    if let Some(slots) = obj.get("data_slots") {
        let slots = slots
            .as_array()
            .ok_or_else(|| format!("{ctx}.data_slots must be an array"))?;
        for (j, slot) in slots.iter().enumerate() {
            let sctx = format!("{ctx}.data_slots[{j}]");
            let s = object(slot, &sctx)?;
            string_field(s, "element_id", &sctx)?;
            string_field(s, "slot", &sctx)?;
            optional_string(s, "page", &sctx)?;
            optional_string(s, "scenario", &sctx)?;
        }
    }
    Ok(())
}

fn object<'a>(value: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>, String> {
    value.as_object().ok_or_else(|| format!("{ctx} must be an object"))
}

fn string_field(obj: &Map<String, Value>, field: &str, ctx: &str) -> Result<(), String> {
    match obj.get(field) {
        Some(Value::String(_)) => Ok(()),
        Some(_) => Err(format!("{ctx}.{field} must be a string")),
        None => Err(format!("{ctx} is missing `{field}`")),
    }
}

fn optional_string(obj: &Map<String, Value>, field: &str, ctx: &str) -> Result<(), String> {
    match obj.get(field) {
        None | Some(Value::Null) | Some(Value::String(_)) => Ok(()),
        Some(_) => Err(format!("{ctx}.{field} must be a string or null")),
    }
}

fn array_field<'a>(obj: &'a Map<String, Value>, field: &str, ctx: &str) -> Result<&'a Vec<Value>, String> {
    match obj.get(field) {
        Some(Value::Array(items)) => Ok(items),
        Some(_) => Err(format!("{ctx}.{field} must be an array")),
        None => Err(format!("{ctx} is missing `{field}`")),
    }
}
