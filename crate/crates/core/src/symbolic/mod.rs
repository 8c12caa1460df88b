//! Symbolic variables, values and tables.
//!
//! A [`SymbolicTable`] holds one [`SymbolicValue`] per (row, variable). Cells
//! are validated against their [`VariableSpec`] on construction, so a table
//! that exists is a table whose every non-missing cell satisfies the kind's
//! invariants. Missing cells are explicit ([`SymbolicValue::Missing`]) and are
//! resolved by the imputation step before recoding.

mod io;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{parse_quantitative_csv, parse_table, table_to_json};

/// Tolerance on `Σ p_i = 1` for modal values.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;
/// Tolerance on the integrality of `l · p_i` when a micro-observation count is given.
pub const MICRO_COUNT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Quantitative,
    CategoricalSingle,
    Interval,
    CategoricalMulti,
    Modal,
}

impl VariableKind {
    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            VariableKind::CategoricalSingle | VariableKind::CategoricalMulti | VariableKind::Modal
        )
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VariableKind::Quantitative => "quantitative",
            VariableKind::CategoricalSingle => "categorical_single",
            VariableKind::Interval => "interval",
            VariableKind::CategoricalMulti => "categorical_multi",
            VariableKind::Modal => "modal",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Input,
    Target,
}

/// A category hierarchy. Leaves are the variable's categories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TaxonomyNode>,
}

impl TaxonomyNode {
    pub fn leaf(label: impl Into<String>) -> Self {
        TaxonomyNode {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<TaxonomyNode>) -> Self {
        TaxonomyNode {
            label: label.into(),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn find(&self, label: &str) -> Option<&TaxonomyNode> {
        if self.label == label {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(label))
    }

    /// Leaf labels under this node, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.label);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a str>) {
        out.push(&self.label);
        for c in &self.children {
            c.collect_labels(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ordered: bool,
    #[serde(default)]
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<TaxonomyNode>,
}

impl VariableSpec {
    fn bare(name: impl Into<String>, kind: VariableKind, categories: Vec<String>) -> Self {
        VariableSpec {
            name: name.into(),
            kind,
            categories,
            ordered: false,
            role: Role::Input,
            taxonomy: None,
        }
    }

    pub fn quantitative(name: impl Into<String>) -> Self {
        Self::bare(name, VariableKind::Quantitative, Vec::new())
    }

    pub fn interval(name: impl Into<String>) -> Self {
        Self::bare(name, VariableKind::Interval, Vec::new())
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self::bare(
            name,
            VariableKind::CategoricalSingle,
            categories.into_iter().map(Into::into).collect(),
        )
    }

    pub fn multi_valued<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self::bare(
            name,
            VariableKind::CategoricalMulti,
            categories.into_iter().map(Into::into).collect(),
        )
    }

    pub fn modal<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self::bare(
            name,
            VariableKind::Modal,
            categories.into_iter().map(Into::into).collect(),
        )
    }

    pub fn ordered(mut self) -> Self {
        self.ordered = true;
        self
    }

    pub fn as_target(mut self) -> Self {
        self.role = Role::Target;
        self
    }

    pub fn with_taxonomy(mut self, root: TaxonomyNode) -> Self {
        self.taxonomy = Some(root);
        self
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Category indices of the leaves below taxonomy node `label`, sorted.
    pub fn node_members(&self, label: &str) -> Option<Vec<usize>> {
        let node = self.taxonomy.as_ref()?.find(label)?;
        let mut idx: Vec<usize> = node
            .leaves()
            .into_iter()
            .filter_map(|l| self.category_index(l))
            .collect();
        idx.sort_unstable();
        Some(idx)
    }

    /// Checks the definition itself (categories, taxonomy), not any values.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Schema(format!("variable `{}`: {msg}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Schema("variable with empty name".into()));
        }
        if self.kind.is_categorical() {
            if self.categories.is_empty() {
                return fail("categorical kinds need at least one category".into());
            }
            let mut seen = HashSet::new();
            for c in &self.categories {
                if c.is_empty() {
                    return fail("empty category label".into());
                }
                if !seen.insert(c.as_str()) {
                    return fail(format!("duplicate category `{c}`"));
                }
            }
        } else if !self.categories.is_empty() {
            return fail(format!("{} variables take no categories", self.kind));
        }
        if self.ordered && self.kind != VariableKind::CategoricalSingle {
            return fail("only categorical_single variables may be ordered".into());
        }
        if let Some(root) = &self.taxonomy {
            if !self.kind.is_categorical() {
                return fail("taxonomy on a non-categorical variable".into());
            }
            let mut leaves = root.leaves();
            leaves.sort_unstable();
            let mut cats: Vec<&str> = self.categories.iter().map(String::as_str).collect();
            cats.sort_unstable();
            if leaves != cats {
                return fail("taxonomy leaves must be exactly the categories, each once".into());
            }
            let mut labels = Vec::new();
            root.collect_labels(&mut labels);
            let mut seen = HashSet::new();
            for l in labels {
                if !seen.insert(l) {
                    return fail(format!("taxonomy label `{l}` appears twice"));
                }
            }
        }
        Ok(())
    }
}

/// One cell of a symbolic table.
#[derive(Clone, Debug, PartialEq)]
pub enum SymbolicValue {
    Number(f64),
    /// 0-based index into the variable's categories.
    Category(usize),
    /// An internal taxonomy node, standing for all of its descendant leaves.
    Node(String),
    Interval { lower: f64, upper: f64 },
    CategorySet(BTreeSet<usize>),
    Distribution {
        probs: Vec<f64>,
        micro_count: Option<u32>,
    },
    Missing,
}

impl SymbolicValue {
    pub fn interval(lower: f64, upper: f64) -> Self {
        SymbolicValue::Interval { lower, upper }
    }

    pub fn set(indices: impl IntoIterator<Item = usize>) -> Self {
        SymbolicValue::CategorySet(indices.into_iter().collect())
    }

    pub fn distribution(probs: Vec<f64>) -> Self {
        SymbolicValue::Distribution {
            probs,
            micro_count: None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, SymbolicValue::Missing)
    }

    fn tag(&self) -> &'static str {
        match self {
            SymbolicValue::Number(_) => "number",
            SymbolicValue::Category(_) => "category",
            SymbolicValue::Node(_) => "taxonomy node",
            SymbolicValue::Interval { .. } => "interval",
            SymbolicValue::CategorySet(_) => "category set",
            SymbolicValue::Distribution { .. } => "distribution",
            SymbolicValue::Missing => "missing",
        }
    }
}

/// Why a value does not fit its variable.
#[derive(Clone, Debug, PartialEq)]
pub enum ValueIssue {
    KindMismatch { expected: VariableKind, found: &'static str },
    NonFinite,
    ReversedInterval { lower: f64, upper: f64 },
    CategoryOutOfRange { index: usize, count: usize },
    EmptySet,
    UnknownNode(String),
    SupportSize { expected: usize, actual: usize },
    ProbabilityOutOfRange { index: usize, value: f64 },
    SumNotOne { sum: f64 },
    ZeroMicroCount,
    MicroCountNotIntegral { index: usize, value: f64 },
}

impl fmt::Display for ValueIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueIssue::KindMismatch { expected, found } => {
                write!(f, "kind mismatch: {expected} variable given a {found}")
            }
            ValueIssue::NonFinite => f.write_str("non-finite number"),
            ValueIssue::ReversedInterval { lower, upper } => {
                write!(f, "interval bounds reversed: [{lower}, {upper}]")
            }
            ValueIssue::CategoryOutOfRange { index, count } => {
                write!(f, "category index {index} out of range (m = {count})")
            }
            ValueIssue::EmptySet => f.write_str("empty category set"),
            ValueIssue::UnknownNode(l) => write!(f, "unknown taxonomy node `{l}`"),
            ValueIssue::SupportSize { expected, actual } => {
                write!(f, "distribution has {actual} entries, support has {expected}")
            }
            ValueIssue::ProbabilityOutOfRange { index, value } => {
                write!(f, "probability p[{index}] = {value} outside [0, 1]")
            }
            ValueIssue::SumNotOne { sum } => write!(f, "sum ≠ 1 (got {sum})"),
            ValueIssue::ZeroMicroCount => f.write_str("micro-observation count must be positive"),
            ValueIssue::MicroCountNotIntegral { index, value } => {
                write!(f, "l·p[{index}] = {value} is not an integer")
            }
        }
    }
}

/// Checks `value` against `spec`, collecting every violated invariant.
pub fn validate_value(spec: &VariableSpec, value: &SymbolicValue) -> std::result::Result<(), Vec<ValueIssue>> {
    use SymbolicValue as V;
    let m = spec.category_count();
    let mut issues = Vec::new();
    let mismatch = || ValueIssue::KindMismatch {
        expected: spec.kind,
        found: value.tag(),
    };
    match (spec.kind, value) {
        (_, V::Missing) => {}
        (VariableKind::Quantitative, V::Number(x)) => {
            if !x.is_finite() {
                issues.push(ValueIssue::NonFinite);
            }
        }
        (VariableKind::CategoricalSingle, V::Category(i)) => {
            if *i >= m {
                issues.push(ValueIssue::CategoryOutOfRange { index: *i, count: m });
            }
        }
        (VariableKind::CategoricalSingle, V::Node(label)) => {
            if spec.node_members(label).is_none() {
                issues.push(ValueIssue::UnknownNode(label.clone()));
            }
        }
        (VariableKind::Interval, V::Interval { lower, upper }) => {
            if !lower.is_finite() || !upper.is_finite() {
                issues.push(ValueIssue::NonFinite);
            } else if lower > upper {
                issues.push(ValueIssue::ReversedInterval {
                    lower: *lower,
                    upper: *upper,
                });
            }
        }
        (VariableKind::CategoricalMulti, V::CategorySet(set)) => {
            if set.is_empty() {
                issues.push(ValueIssue::EmptySet);
            }
            for &i in set {
                if i >= m {
                    issues.push(ValueIssue::CategoryOutOfRange { index: i, count: m });
                }
            }
        }
        (VariableKind::Modal, V::Distribution { probs, micro_count }) => {
            check_distribution(m, probs, *micro_count, &mut issues);
        }
        _ => issues.push(mismatch()),
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

fn check_distribution(m: usize, probs: &[f64], micro_count: Option<u32>, issues: &mut Vec<ValueIssue>) {
    if probs.len() != m {
        issues.push(ValueIssue::SupportSize {
            expected: m,
            actual: probs.len(),
        });
    }
    if probs.iter().any(|p| !p.is_finite()) {
        issues.push(ValueIssue::NonFinite);
        return;
    }
    for (index, &value) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            issues.push(ValueIssue::ProbabilityOutOfRange { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
        issues.push(ValueIssue::SumNotOne { sum });
    }
    match micro_count {
        Some(0) => issues.push(ValueIssue::ZeroMicroCount),
        Some(l) => {
            for (index, &p) in probs.iter().enumerate() {
                let value = f64::from(l) * p;
                if (value - value.round()).abs() > MICRO_COUNT_TOL {
                    issues.push(ValueIssue::MicroCountNotIntegral { index, value });
                }
            }
        }
        None => {}
    }
}

/// A validated sample of symbolic observations.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicTable {
    specs: Vec<VariableSpec>,
    rows: Vec<Vec<SymbolicValue>>,
}

impl SymbolicTable {
    pub fn new(specs: Vec<VariableSpec>, rows: Vec<Vec<SymbolicValue>>) -> Result<Self> {
        let mut names = HashSet::new();
        for s in &specs {
            s.validate()?;
            if !names.insert(s.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable name `{}`", s.name)));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != specs.len() {
                return Err(Error::parse(
                    Some(r),
                    None,
                    format!("row has {} cells, expected {}", row.len(), specs.len()),
                ));
            }
            for (spec, v) in specs.iter().zip(row) {
                if let Err(issues) = validate_value(spec, v) {
                    return Err(Error::Validation {
                        row: r,
                        column: spec.name.clone(),
                        issues,
                    });
                }
            }
        }
        Ok(SymbolicTable { specs, rows })
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn rows(&self) -> &[Vec<SymbolicValue>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn indices_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.specs.len()).filter(|&j| self.specs[j].role == role).collect()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &SymbolicValue> + '_ {
        self.rows.iter().map(move |r| &r[j])
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(SymbolicValue::is_missing)
    }

    /// A table with the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> SymbolicTable {
        SymbolicTable {
            specs: self.specs.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}
