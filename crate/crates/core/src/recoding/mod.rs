//! Numerical recoding of symbolic variables.
//!
//! Each variable becomes a contiguous [`ColumnGroup`] of an [`EncodedMatrix`]:
//!
//! | kind | coding | width |
//! |------|--------|-------|
//! | quantitative | `identity` | 1 |
//! | categorical single | `disjunctive` (one-hot), `rank` (ordered) or `taxonomy` | m or 1 |
//! | interval | `mean_length`, `mean_log_length` or `bounds` | 2 |
//! | categorical multi | `multi01` | m |
//! | modal | `modal_probs` | m |
//!
//! Category-like groups carry a weight-decay divisor equal to their width so
//! that a variable's first-layer penalty does not grow with its number of
//! categories.

mod decode;
mod standardize;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{SymbolicTable, SymbolicValue, VariableKind, VariableSpec};

pub use decode::{decode_output_block, output_block_for, output_blocks, BlockKind, OutputBlockSpec};
pub use standardize::{fit_standardizer, fit_target_standardizer, ColumnStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodingTag {
    Identity,
    Disjunctive,
    Rank,
    MeanLength,
    MeanLogLength,
    Bounds,
    Multi01,
    ModalProbs,
    Taxonomy,
}

impl CodingTag {
    /// Codings whose columns split one variable into per-category indicators.
    pub fn is_category_like(self) -> bool {
        matches!(
            self,
            CodingTag::Disjunctive | CodingTag::Multi01 | CodingTag::ModalProbs | CodingTag::Taxonomy
        )
    }

    pub fn accepts(self, spec: &VariableSpec) -> bool {
        use CodingTag as C;
        match spec.kind {
            VariableKind::Quantitative => self == C::Identity,
            VariableKind::CategoricalSingle => match self {
                C::Disjunctive | C::Rank => true,
                C::Taxonomy => spec.taxonomy.is_some(),
                _ => false,
            },
            VariableKind::Interval => matches!(self, C::MeanLength | C::MeanLogLength | C::Bounds),
            VariableKind::CategoricalMulti => self == C::Multi01,
            VariableKind::Modal => self == C::ModalProbs,
        }
    }

    pub fn width(self, spec: &VariableSpec) -> usize {
        match self {
            CodingTag::Identity | CodingTag::Rank => 1,
            CodingTag::MeanLength | CodingTag::MeanLogLength | CodingTag::Bounds => 2,
            _ => spec.category_count(),
        }
    }

    pub fn decay_divisor(self, width: usize) -> f64 {
        if self.is_category_like() {
            width as f64
        } else {
            1.0
        }
    }
}

/// Per-variable coding choices, keyed by variable name.
pub type CodingModes = BTreeMap<String, CodingTag>;

pub fn parse_coding_modes(json: &str) -> Result<CodingModes> {
    serde_json::from_str(json).map_err(|e| Error::Config(format!("coding modes: {e}")))
}

/// Default coding for an input variable.
pub fn default_coding(spec: &VariableSpec) -> CodingTag {
    match spec.kind {
        VariableKind::Quantitative => CodingTag::Identity,
        VariableKind::CategoricalSingle if spec.ordered => CodingTag::Rank,
        VariableKind::CategoricalSingle if spec.taxonomy.is_some() => CodingTag::Taxonomy,
        VariableKind::CategoricalSingle => CodingTag::Disjunctive,
        VariableKind::Interval => CodingTag::MeanLength,
        VariableKind::CategoricalMulti => CodingTag::Multi01,
        VariableKind::Modal => CodingTag::ModalProbs,
    }
}

/// Default coding for a target variable: intervals use `(mean, log length)`
/// when no observed interval is degenerate, `(mean, length)` otherwise.
pub fn default_target_coding<'a>(
    spec: &VariableSpec,
    values: impl IntoIterator<Item = &'a SymbolicValue>,
) -> CodingTag {
    if spec.kind == VariableKind::Interval {
        let all_positive = values.into_iter().all(|v| match v {
            SymbolicValue::Interval { lower, upper } => upper > lower,
            _ => true,
        });
        if all_positive {
            CodingTag::MeanLogLength
        } else {
            CodingTag::MeanLength
        }
    } else {
        default_coding(spec)
    }
}

/// Metadata for the columns produced by one source variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub source_variable: String,
    pub columns: Range<usize>,
    pub decay_divisor: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub coding: CodingTag,
    /// Column labels, e.g. category names.
    pub labels: Vec<String>,
}

impl ColumnGroup {
    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

/// Row-major numeric design matrix plus per-variable column metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<f64>,
    pub groups: Vec<ColumnGroup>,
}

impl EncodedMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>, groups: Vec<ColumnGroup>) -> Result<Self> {
        crate::error::check_len(n_rows * n_cols, values.len(), "encoded matrix values")?;
        let m = EncodedMatrix {
            n_rows,
            n_cols,
            values,
            groups,
        };
        m.check_partition()?;
        Ok(m)
    }

    fn check_partition(&self) -> Result<()> {
        let mut next = 0;
        for g in &self.groups {
            if g.columns.start != next || g.columns.end <= g.columns.start {
                return Err(Error::Schema(format!(
                    "column group `{}` does not continue the partition at column {next}",
                    g.source_variable
                )));
            }
            if g.mean.len() != g.width() || g.scale.len() != g.width() {
                return Err(Error::Schema(format!(
                    "column group `{}` statistics have the wrong width",
                    g.source_variable
                )));
            }
            next = g.columns.end;
        }
        if next != self.n_cols {
            return Err(Error::Schema(format!(
                "column groups cover {next} of {} columns",
                self.n_cols
            )));
        }
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// Per-column decay divisors, in column order.
    pub fn decay_divisors(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.decay_divisor, g.width()))
            .collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| g.labels.iter().map(move |l| format!("{}:{l}", g.source_variable)))
            .collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        self.groups.iter().flat_map(|g| g.mean.iter().copied()).collect()
    }

    pub fn column_scales(&self) -> Vec<f64> {
        self.groups.iter().flat_map(|g| g.scale.iter().copied()).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> EncodedMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        EncodedMatrix {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            values,
            groups: self.groups.clone(),
        }
    }
}

pub fn encode_quantitative(x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(Error::encode("quantitative", format!("non-finite value {x}")));
    }
    Ok(vec![x])
}

fn unit_vector(m: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[i] = 1.0;
    v
}

fn check_index(spec: &VariableSpec, i: usize) -> Result<()> {
    if i >= spec.category_count() {
        return Err(Error::encode(
            &spec.name,
            format!("category index {i} out of range (m = {})", spec.category_count()),
        ));
    }
    Ok(())
}

/// Disjunctive code of category `index`, or its 1-based rank when the variable is ordered.
pub fn encode_categorical_single(spec: &VariableSpec, index: usize) -> Result<Vec<f64>> {
    check_index(spec, index)?;
    if spec.ordered {
        Ok(vec![(index + 1) as f64])
    } else {
        Ok(unit_vector(spec.category_count(), index))
    }
}

/// Two-column interval code under `coding` (`mean_length`, `mean_log_length` or `bounds`).
pub fn encode_interval(lower: f64, upper: f64, coding: CodingTag) -> Result<Vec<f64>> {
    if !lower.is_finite() || !upper.is_finite() || lower > upper {
        return Err(Error::encode("interval", format!("invalid interval [{lower}, {upper}]")));
    }
    let mean = (lower + upper) / 2.0;
    let length = upper - lower;
    match coding {
        CodingTag::MeanLength => Ok(vec![mean, length]),
        CodingTag::Bounds => Ok(vec![lower, upper]),
        CodingTag::MeanLogLength => {
            if length > 0.0 {
                Ok(vec![mean, length.ln()])
            } else {
                Err(Error::encode(
                    "interval",
                    "degenerate interval; use mean_length",
                ))
            }
        }
        other => Err(Error::encode("interval", format!("{other:?} is not an interval coding"))),
    }
}

pub fn encode_categorical_multi(spec: &VariableSpec, set: &std::collections::BTreeSet<usize>) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::encode(&spec.name, "empty category set"));
    }
    let mut v = vec![0.0; spec.category_count()];
    for &i in set {
        check_index(spec, i)?;
        v[i] = 1.0;
    }
    Ok(v)
}

pub fn encode_modal(spec: &VariableSpec, probs: &[f64]) -> Result<Vec<f64>> {
    let value = SymbolicValue::distribution(probs.to_vec());
    if let Err(issues) = crate::symbolic::validate_value(spec, &value) {
        return Err(Error::encode(&spec.name, issues[0].to_string()));
    }
    Ok(probs.to_vec())
}

/// Hierarchical code: 1 on every leaf descending from taxonomy node `label`.
pub fn encode_taxonomy(spec: &VariableSpec, label: &str) -> Result<Vec<f64>> {
    if spec.taxonomy.is_none() {
        return Err(Error::encode(&spec.name, "variable has no taxonomy"));
    }
    let members = spec
        .node_members(label)
        .ok_or_else(|| Error::encode(&spec.name, format!("unknown taxonomy node `{label}`")))?;
    let mut v = vec![0.0; spec.category_count()];
    for i in members {
        v[i] = 1.0;
    }
    Ok(v)
}

/// Encodes one value of `spec` under `coding`.
pub fn encode_value(spec: &VariableSpec, value: &SymbolicValue, coding: CodingTag) -> Result<Vec<f64>> {
    use SymbolicValue as V;
    if !coding.accepts(spec) {
        return Err(Error::encode(
            &spec.name,
            format!("coding {coding:?} does not apply to a {} variable", spec.kind),
        ));
    }
    let wrong = || Error::encode(&spec.name, format!("value {value:?} does not match coding {coding:?}"));
    match (coding, value) {
        (_, V::Missing) => Err(Error::encode(&spec.name, "missing value")),
        (CodingTag::Identity, V::Number(x)) => encode_quantitative(*x),
        (CodingTag::Disjunctive, V::Category(i)) => {
            check_index(spec, *i)?;
            Ok(unit_vector(spec.category_count(), *i))
        }
        (CodingTag::Rank, V::Category(i)) => {
            check_index(spec, *i)?;
            Ok(vec![(*i + 1) as f64])
        }
        (CodingTag::Taxonomy, V::Category(i)) => {
            check_index(spec, *i)?;
            encode_taxonomy(spec, &spec.categories[*i])
        }
        (CodingTag::Taxonomy, V::Node(label)) => encode_taxonomy(spec, label),
        (CodingTag::MeanLength | CodingTag::MeanLogLength | CodingTag::Bounds, V::Interval { lower, upper }) => {
            encode_interval(*lower, *upper, coding).map_err(|e| match e {
                Error::Encode { message, .. } => Error::encode(&spec.name, message),
                other => other,
            })
        }
        (CodingTag::Multi01, V::CategorySet(set)) => encode_categorical_multi(spec, set),
        (CodingTag::ModalProbs, V::Distribution { probs, .. }) => encode_modal(spec, probs),
        _ => Err(wrong()),
    }
}

fn group_labels(spec: &VariableSpec, coding: CodingTag) -> Vec<String> {
    match coding {
        CodingTag::Identity => vec!["value".into()],
        CodingTag::Rank => vec!["rank".into()],
        CodingTag::MeanLength => vec!["mean".into(), "length".into()],
        CodingTag::MeanLogLength => vec!["mean".into(), "log_length".into()],
        CodingTag::Bounds => vec!["lower".into(), "upper".into()],
        _ => spec.categories.clone(),
    }
}

/// Resolves the coding of variable `j`, falling back to the input or target default.
pub fn coding_for(table: &SymbolicTable, j: usize, modes: &CodingModes) -> Result<CodingTag> {
    let spec = &table.specs()[j];
    let coding = match modes.get(&spec.name) {
        Some(&c) => c,
        None if spec.role == crate::symbolic::Role::Target => default_target_coding(spec, table.column(j)),
        None => default_coding(spec),
    };
    if !coding.accepts(spec) {
        return Err(Error::encode(
            &spec.name,
            format!("coding {coding:?} does not apply to a {} variable", spec.kind),
        ));
    }
    Ok(coding)
}

/// Encodes the listed variables (in the given order) into one matrix.
pub fn encode_variables(table: &SymbolicTable, variables: &[usize], modes: &CodingModes) -> Result<EncodedMatrix> {
    let mut groups = Vec::with_capacity(variables.len());
    let mut codings = Vec::with_capacity(variables.len());
    let mut start = 0;
    for &j in variables {
        let spec = &table.specs()[j];
        let coding = coding_for(table, j, modes)?;
        let width = coding.width(spec);
        groups.push(ColumnGroup {
            source_variable: spec.name.clone(),
            columns: start..start + width,
            decay_divisor: coding.decay_divisor(width),
            mean: vec![0.0; width],
            scale: vec![1.0; width],
            coding,
            labels: group_labels(spec, coding),
        });
        codings.push(coding);
        start += width;
    }
    let n_cols = start;
    let mut values = Vec::with_capacity(table.n_rows() * n_cols);
    for (r, row) in table.rows().iter().enumerate() {
        for (&j, &coding) in variables.iter().zip(&codings) {
            let spec = &table.specs()[j];
            if row[j].is_missing() {
                return Err(Error::MissingValue {
                    variable: spec.name.clone(),
                    row: r,
                });
            }
            values.extend(encode_value(spec, &row[j], coding)?);
        }
    }
    EncodedMatrix::new(table.n_rows(), n_cols, values, groups)
}

/// Encodes every variable of the table, in table order.
pub fn encode_table(table: &SymbolicTable, modes: &CodingModes) -> Result<EncodedMatrix> {
    let all: Vec<usize> = (0..table.specs().len()).collect();
    encode_variables(table, &all, modes)
}
