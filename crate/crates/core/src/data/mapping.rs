//! Dataset loading, deterministic column mapping, LLM-assisted mapping and
//! the per-suite binding pass.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::check::check;
use super::synth::{derive_seed, synthesize_pair, synthesize_value};
use super::{BindingSource, DataBinding, DataError, Scenario};
use crate::llm::{complete, template_header, Backend, PromptEnvelope, SchemaId};
use crate::testgen::{DataSlot, TestCase, TestSuite};

/// Column that selects a dataset row per case; row 0 is used otherwise.
pub const CASE_COLUMN: &str = "case_id";

/// Tabular records with named columns, read from CSV with a header row.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, DataError> {
        if columns.iter().any(|c| c.trim().is_empty()) {
            return Err(DataError::Dataset("every column needs a name".into()));
        }
        if let Some(row) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(DataError::Dataset(format!(
                "row {} has {} fields, header has {}",
                row + 1,
                rows[row].len(),
                columns.len()
            )));
        }
        Ok(Self { columns, rows })
    }

    pub fn from_csv(text: &str) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns = reader
            .headers()
            .map_err(|e| DataError::Dataset(e.to_string()))?
            .iter()
            .map(|c| c.trim().to_string())
            .collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| DataError::Dataset(e.to_string()))?;
        Self::new(columns, rows)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DataError::Dataset(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Exact column name first, then normalized name.
    pub fn resolve_column(&self, slot: &str) -> Option<&str> {
        if let Some(i) = self.column_index(slot) {
            return Some(&self.columns[i]);
        }
        let wanted = normalize_name(slot);
        self.columns
            .iter()
            .find(|c| normalize_name(c) == wanted)
            .map(String::as_str)
    }

    /// The row addressed to `case_id`, or the first row.
    /// The row keyed by `case_id`; without a case column the first row
    /// serves every case.
    pub fn row_for(&self, case_id: &str) -> Option<&[String]> {
        match self.column_index(CASE_COLUMN) {
            Some(i) => self.rows.iter().find(|r| r[i] == case_id),
            None => self.rows.first(),
        }
        .map(Vec::as_slice)
    }

    /// An empty cell is no value.
    pub fn value(&self, case_id: &str, column: &str) -> Option<&str> {
        let i = self.column_index(column)?;
        self.row_for(case_id).map(|r| r[i].as_str()).filter(|v| !v.is_empty())
    }
}

/// Lowercase with `_`, `-` and whitespace removed.
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| !matches!(c, '_' | '-') && !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingSet {
    pub seed: u64,
    pub bindings: Vec<DataBinding>,
    /// Slot mappings proposed by the model and accepted after verification,
    /// keyed `case_id/slot`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub llm_mappings: BTreeMap<String, String>,
}

impl BindingSet {
    pub fn for_case<'a>(&'a self, case_id: &'a str) -> impl Iterator<Item = &'a DataBinding> + 'a {
        self.bindings.iter().filter(move |b| b.case_id == case_id)
    }

    pub fn value(&self, case_id: &str, slot: &str) -> Option<&str> {
        self.bindings
            .iter()
            .find(|b| b.case_id == case_id && b.slot == slot)
            .map(|b| b.value.as_str())
    }

    /// slot → value for one case, as the executor consumes it.
    pub fn values_for(&self, case_id: &str) -> BTreeMap<String, String> {
        self.for_case(case_id).map(|b| (b.slot.clone(), b.value.clone())).collect()
    }
}

fn provided(case: &TestCase, slot: &DataSlot, value: &str) -> DataBinding {
    DataBinding {
        case_id: case.id.clone(),
        slot: slot.slot.clone(),
        source: BindingSource::Provided,
        value: value.to_string(),
        constraint_checked: check(&slot.constraint, value).is_empty(),
        scenario: slot.scenario.clone(),
        violated_rule: None,
    }
}

/// Deterministic mapping of every valid-scenario slot to a dataset column.
/// Other scenarios exercise generated values and are never mapped.
pub fn map_provided_data(suite: &TestSuite, dataset: &Dataset) -> Result<Vec<DataBinding>, DataError> {
    let mut mapped = Vec::new();
    let mut unresolved = Vec::new();
    for case in &suite.cases {
        for slot in case.data_slots.iter().filter(|s| s.scenario == Scenario::Valid) {
            match dataset
                .resolve_column(&slot.slot)
                .and_then(|column| dataset.value(&case.id, column))
            {
                Some(value) => mapped.push(provided(case, slot, value)),
                None => unresolved.push(format!("{}/{}", case.id, slot.slot)),
            }
        }
    }
    if unresolved.is_empty() {
        Ok(mapped)
    } else {
        Err(DataError::UnmappableSlot { unresolved, mapped })
    }
}

pub fn data_mapping_prompt(case: &TestCase, slots: &[&DataSlot], dataset: &Dataset) -> PromptEnvelope {
    let mut text = template_header("data_mapping.v1");
    text.push_str(
        "\nMap each unresolved test data slot to the dataset column that should fill it, \
         or null when no column fits.\n\
         Reply with JSON: {\"mappings\": [{\"slot\": \"<slot>\", \"column\": \"<column or null>\"}]}\n\n",
    );
    text.push_str(&format!("COLUMNS {}\n", dataset.columns.join(", ")));
    text.push_str(&format!("CASE {} \"{}\" [{}]\n", case.id, case.name, case.test_type));
    for step in &case.steps {
        text.push_str(&format!("STEP {} {} {}", step.ordinal, step.verb, step.target));
        if let Some(argument) = &step.argument {
            text.push_str(&format!(" {argument}"));
        }
        text.push('\n');
    }
    for slot in slots {
        text.push_str(&format!(
            "SLOT {} element={} kind={:?} required={}\n",
            slot.slot, slot.element_id, slot.constraint.kind, slot.constraint.required
        ));
    }
    PromptEnvelope::new("data_mapping.v1", text, vec![case.id.clone()], SchemaId::DataMapping)
}

/// Asks the model for column mappings and keeps only those naming a real
/// column whose value satisfies the slot constraint.
fn llm_mappings(
    case: &TestCase,
    slots: &[&DataSlot],
    dataset: &Dataset,
    backend: &dyn Backend,
) -> BTreeMap<String, String> {
    let envelope = data_mapping_prompt(case, slots, dataset);
    let reply = match complete(&envelope, backend) {
        Ok(reply) => reply,
        Err(e) => {
            log::warn!("data mapping for {} failed: {e}", case.id);
            return BTreeMap::new();
        }
    };
    let Some(items) = reply.parsed.as_ref().and_then(|v| v.get("mappings")).and_then(|v| v.as_array()) else {
        return BTreeMap::new();
    };
    let mut accepted = BTreeMap::new();
    for item in items {
        let (Some(slot_name), Some(column)) = (
            item.get("slot").and_then(|v| v.as_str()),
            item.get("column").and_then(|v| v.as_str()),
        ) else {
            continue;
        };
        let Some(slot) = slots.iter().find(|s| s.slot == slot_name) else {
            continue;
        };
        match dataset.value(&case.id, column) {
            Some(value) if check(&slot.constraint, value).is_empty() => {
                accepted.insert(slot_name.to_string(), column.to_string());
            }
            Some(_) => log::info!("{}: column {column} violates the {slot_name} constraint", case.id),
            None => log::info!("{}: model proposed unknown column {column}", case.id),
        }
    }
    accepted
}

fn synthetic(case: &TestCase, slot: &DataSlot, value: String, violated: Option<super::Rule>) -> DataBinding {
    let constraint_checked = violated.is_none() && check(&slot.constraint, &value).is_empty();
    DataBinding {
        case_id: case.id.clone(),
        slot: slot.slot.clone(),
        source: BindingSource::Synthetic,
        value,
        constraint_checked,
        scenario: slot.scenario.clone(),
        violated_rule: violated,
    }
}

fn bind_case(
    case: &TestCase,
    dataset: Option<&Dataset>,
    oracle: Option<&dyn Backend>,
    seed: u64,
    llm_log: &mut BTreeMap<String, String>,
) -> Result<Vec<DataBinding>, DataError> {
    let fail = |reason: String| DataError::Binding { case: case.id.clone(), reason };
    let mut bound: BTreeMap<&str, DataBinding> = BTreeMap::new();

    if let Some(dataset) = dataset {
        let mut unresolved = Vec::new();
        for slot in case.data_slots.iter().filter(|s| s.scenario == Scenario::Valid) {
            match dataset.resolve_column(&slot.slot).and_then(|c| dataset.value(&case.id, c)) {
                Some(value) => {
                    bound.insert(&slot.slot, provided(case, slot, value));
                }
                None => unresolved.push(slot),
            }
        }
        if let (Some(backend), false) = (oracle, unresolved.is_empty()) {
            for (slot_name, column) in llm_mappings(case, &unresolved, dataset, backend) {
                let slot = case.slot(&slot_name).expect("mapping names an unresolved slot");
                let value = dataset.value(&case.id, &column).expect("verified column");
                bound.insert(&slot.slot, provided(case, slot, value));
                llm_log.insert(format!("{}/{}", case.id, slot_name), column);
            }
        }
    }

    // unpaired slots first so that paired ones can refer to them
    let (paired, unpaired): (Vec<&DataSlot>, Vec<&DataSlot>) =
        case.data_slots.iter().partition(|s| s.scenario.paired_with().is_some());
    for slot in unpaired {
        if bound.contains_key(slot.slot.as_str()) {
            continue;
        }
        let synthesized = synthesize_value(&slot.constraint, &slot.scenario, derive_seed(seed, &case.id, &slot.slot))
            .map_err(|e| fail(format!("slot {}: {e}", slot.slot)))?;
        bound.insert(&slot.slot, synthetic(case, slot, synthesized.value, synthesized.violated));
    }
    for slot in paired {
        let other = slot.scenario.paired_with().expect("partitioned on pairing");
        let Some(reference) = bound.get(other).map(|b| b.value.clone()) else {
            return Err(fail(format!("slot {} pairs with unknown slot {other}", slot.slot)));
        };
        let value = match slot.scenario {
            Scenario::Match(_) => reference,
            _ => {
                let slot_seed = derive_seed(seed, &case.id, &slot.slot);
                let mut value = None;
                for offset in 0..16 {
                    let (a, b) = synthesize_pair(&slot.constraint, true, slot_seed.wrapping_add(offset))
                        .map_err(|e| fail(format!("slot {}: {e}", slot.slot)))?;
                    if let Some(v) = [a, b].into_iter().find(|v| *v != reference) {
                        value = Some(v);
                        break;
                    }
                }
                value.ok_or_else(|| fail(format!("slot {} cannot differ from {other}", slot.slot)))?
            }
        };
        bound.insert(&slot.slot, synthetic(case, slot, value, None));
    }

    Ok(case
        .data_slots
        .iter()
        .map(|s| bound.get(s.slot.as_str()).cloned().expect("every slot bound"))
        .collect())
}

/// One binding per data slot of every case: provided data where a column
/// maps (deterministically, then through `oracle` when given), synthesized
/// values otherwise. Identical inputs give identical binding sets.
pub fn bind_suite(
    suite: &TestSuite,
    dataset: Option<&Dataset>,
    oracle: Option<&dyn Backend>,
    seed: u64,
) -> Result<BindingSet, DataError> {
    let mut bindings = Vec::new();
    let mut llm_mappings = BTreeMap::new();
    for case in &suite.cases {
        bindings.extend(bind_case(case, dataset, oracle, seed, &mut llm_mappings)?);
    }
    Ok(BindingSet { seed, bindings, llm_mappings })
}
