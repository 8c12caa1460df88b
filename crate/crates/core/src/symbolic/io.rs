//! JSON dataset format and quantitative CSV import.
//!
//! ```json
//! {"variables": [{"name": "x", "kind": "interval", "role": "input"}, ...],
//!  "rows": [[{"a": 1, "b": 3}, ...], ...]}
//! ```
//!
//! Cells are a number, `{"a":…,"b":…}`, `{"cat":"A1"}`, `{"set":["A1","A3"]}`,
//! `{"dist":[…],"l":…}` or `null` for a missing value.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{validate_value, Role, SymbolicTable, SymbolicValue, VariableKind, VariableSpec};
use crate::error::{Error, Result};

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Document {
    variables: Vec<VariableSpec>,
    rows: Vec<Vec<Value>>,
}

/// Parses and validates a JSON dataset document.
pub fn parse_table(document: &str) -> Result<SymbolicTable> {
    let doc: Document =
        serde_json::from_str(document).map_err(|e| Error::parse(None, None, e.to_string()))?;
    for spec in &doc.variables {
        spec.validate()?;
    }
    let mut rows = Vec::with_capacity(doc.rows.len());
    for (r, raw) in doc.rows.iter().enumerate() {
        if raw.len() != doc.variables.len() {
            return Err(Error::parse(
                Some(r),
                None,
                format!("row has {} cells, expected {}", raw.len(), doc.variables.len()),
            ));
        }
        let mut row = Vec::with_capacity(raw.len());
        for (spec, cell) in doc.variables.iter().zip(raw) {
            let value = cell_to_value(spec, cell)
                .map_err(|message| Error::parse(Some(r), Some(&spec.name), message))?;
            if let Err(issues) = validate_value(spec, &value) {
                return Err(Error::Validation {
                    row: r,
                    column: spec.name.clone(),
                    issues,
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    SymbolicTable::new(doc.variables, rows)
}

/// Serializes a table to the JSON dataset format (pretty-printed).
pub fn table_to_json(table: &SymbolicTable) -> String {
    let doc = Document {
        variables: table.specs().to_vec(),
        rows: table
            .rows()
            .iter()
            .map(|row| {
                table
                    .specs()
                    .iter()
                    .zip(row)
                    .map(|(spec, v)| value_to_cell(spec, v))
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("dataset documents always serialize")
}

fn number(v: &Value, what: &str) -> std::result::Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("`{what}` must be a number, got {v}"))
}

fn resolve_label(spec: &VariableSpec, label: &str) -> std::result::Result<SymbolicValue, String> {
    if let Some(i) = spec.category_index(label) {
        return Ok(SymbolicValue::Category(i));
    }
    if spec.node_members(label).is_some() {
        return Ok(SymbolicValue::Node(label.to_owned()));
    }
    Err(format!("unknown category `{label}`"))
}

fn cell_to_value(spec: &VariableSpec, cell: &Value) -> std::result::Result<SymbolicValue, String> {
    let obj = match cell {
        Value::Null => return Ok(SymbolicValue::Missing),
        Value::Number(_) => return Ok(SymbolicValue::Number(number(cell, "cell")?)),
        Value::Object(obj) => obj,
        other => return Err(format!("unrecognized cell {other}")),
    };
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    match keys.as_slice() {
        ["a", "b"] => Ok(SymbolicValue::Interval {
            lower: number(&obj["a"], "a")?,
            upper: number(&obj["b"], "b")?,
        }),
        ["cat"] => {
            let label = obj["cat"].as_str().ok_or("`cat` must be a string")?;
            resolve_label(spec, label)
        }
        ["set"] => {
            let labels = obj["set"].as_array().ok_or("`set` must be an array")?;
            let mut set = BTreeSet::new();
            for l in labels {
                let label = l.as_str().ok_or("`set` entries must be strings")?;
                let i = spec
                    .category_index(label)
                    .ok_or_else(|| format!("unknown category `{label}`"))?;
                if !set.insert(i) {
                    return Err(format!("category `{label}` repeated in set"));
                }
            }
            Ok(SymbolicValue::CategorySet(set))
        }
        ["dist"] | ["dist", "l"] => {
            let probs = obj["dist"]
                .as_array()
                .ok_or("`dist` must be an array")?
                .iter()
                .map(|p| number(p, "dist"))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let micro_count = match obj.get("l") {
                None | Some(Value::Null) => None,
                Some(l) => {
                    let l = l.as_u64().ok_or("`l` must be a positive integer")?;
                    Some(u32::try_from(l).map_err(|_| "`l` too large".to_string())?)
                }
            };
            Ok(SymbolicValue::Distribution { probs, micro_count })
        }
        _ => Err(format!("unrecognized cell keys {keys:?}")),
    }
}

fn value_to_cell(spec: &VariableSpec, value: &SymbolicValue) -> Value {
    let label = |i: usize| Value::String(spec.categories[i].clone());
    let obj = |pairs: Vec<(&str, Value)>| {
        Value::Object(pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect::<Map<_, _>>())
    };
    match value {
        SymbolicValue::Missing => Value::Null,
        SymbolicValue::Number(x) => Value::from(*x),
        SymbolicValue::Category(i) => obj(vec![("cat", label(*i))]),
        SymbolicValue::Node(l) => obj(vec![("cat", Value::String(l.clone()))]),
        SymbolicValue::Interval { lower, upper } => {
            obj(vec![("a", Value::from(*lower)), ("b", Value::from(*upper))])
        }
        SymbolicValue::CategorySet(set) => {
            obj(vec![("set", Value::Array(set.iter().map(|&i| label(i)).collect()))])
        }
        SymbolicValue::Distribution { probs, micro_count } => {
            let mut pairs = vec![("dist", Value::Array(probs.iter().map(|&p| Value::from(p)).collect()))];
            if let Some(l) = micro_count {
                pairs.push(("l", Value::from(*l)));
            }
            obj(pairs)
        }
    }
}

/// Reads a headed CSV of numbers into an all-quantitative table. Empty cells
/// and `NA` are missing; columns named in `targets` get the target role.
pub fn parse_quantitative_csv(text: &str, targets: &[&str]) -> Result<SymbolicTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let specs: Vec<VariableSpec> = headers
        .iter()
        .map(|h| {
            let mut s = VariableSpec::quantitative(h);
            if targets.contains(&h) {
                s.role = Role::Target;
            }
            s
        })
        .collect();
    for t in targets {
        if !headers.iter().any(|h| h == *t) {
            return Err(Error::Schema(format!("target column `{t}` not in CSV header")));
        }
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .zip(&specs)
            .map(|(field, spec)| {
                if field.is_empty() || field.eq_ignore_ascii_case("na") {
                    Ok(SymbolicValue::Missing)
                } else {
                    field
                        .parse::<f64>()
                        .map(SymbolicValue::Number)
                        .map_err(|e| Error::parse(Some(r), Some(&spec.name), e.to_string()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    debug_assert!(specs.iter().all(|s| s.kind == VariableKind::Quantitative));
    SymbolicTable::new(specs, rows)
}
