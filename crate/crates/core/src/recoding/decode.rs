use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{CodingTag, EncodedMatrix};
use crate::error::{Error, Result};
use crate::symbolic::{SymbolicTable, SymbolicValue, VariableKind, VariableSpec};

/// How a slice of output neurons models one symbolic target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Identity activation, quadratic loss.
    LinearQuadratic,
    /// `(mean, length)`: identity on the mean, exponential on the length, quadratic loss.
    IntervalMeanLength,
    /// `(mean, log length)`: identity on both, quadratic loss.
    IntervalMeanLogLength,
    /// Softmax activation, cross-entropy loss.
    SoftmaxCrossEntropy,
    /// Logistic activation per neuron, independent cross-entropy loss.
    LogisticIndependent,
    /// Softmax activation, multinomial cross-entropy weighted by the micro-observation count.
    ModalSoftmax,
}

impl BlockKind {
    pub fn compatible_with(self, kind: VariableKind) -> bool {
        match self {
            BlockKind::LinearQuadratic => {
                matches!(kind, VariableKind::Quantitative | VariableKind::CategoricalSingle)
            }
            BlockKind::IntervalMeanLength | BlockKind::IntervalMeanLogLength => kind == VariableKind::Interval,
            BlockKind::SoftmaxCrossEntropy => kind == VariableKind::CategoricalSingle,
            BlockKind::LogisticIndependent => {
                matches!(kind, VariableKind::CategoricalMulti | VariableKind::CategoricalSingle)
            }
            BlockKind::ModalSoftmax => kind == VariableKind::Modal,
        }
    }

    /// Required block width, if fixed.
    pub fn fixed_width(self) -> Option<usize> {
        match self {
            BlockKind::LinearQuadratic => Some(1),
            BlockKind::IntervalMeanLength | BlockKind::IntervalMeanLogLength => Some(2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputBlockSpec {
    pub source_variable: String,
    pub columns: Range<usize>,
    pub kind: BlockKind,
    /// Weight the modal loss by each row's micro-observation count.
    #[serde(default)]
    pub micro_weighted: bool,
    /// Logistic blocks only: add the `(1 - y) ln(1 - t)` terms of the
    /// independent Bernoulli likelihood to the loss.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bernoulli: bool,
}

impl OutputBlockSpec {
    pub fn new(source_variable: impl Into<String>, columns: Range<usize>, kind: BlockKind) -> Self {
        OutputBlockSpec {
            source_variable: source_variable.into(),
            columns,
            kind,
            micro_weighted: false,
            bernoulli: false,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Output block for a target variable coded with `coding` at `columns`.
pub fn output_block_for(spec: &VariableSpec, coding: CodingTag, columns: Range<usize>) -> Result<OutputBlockSpec> {
    let kind = match (spec.kind, coding) {
        (VariableKind::Quantitative, CodingTag::Identity) => BlockKind::LinearQuadratic,
        (VariableKind::CategoricalSingle, CodingTag::Rank) => BlockKind::LinearQuadratic,
        (VariableKind::CategoricalSingle, CodingTag::Disjunctive) => BlockKind::SoftmaxCrossEntropy,
        (VariableKind::CategoricalSingle, CodingTag::Taxonomy) => BlockKind::LogisticIndependent,
        (VariableKind::Interval, CodingTag::MeanLength) => BlockKind::IntervalMeanLength,
        (VariableKind::Interval, CodingTag::MeanLogLength) => BlockKind::IntervalMeanLogLength,
        (VariableKind::Interval, CodingTag::Bounds) => {
            return Err(Error::encode(
                &spec.name,
                "bound coding cannot be used for targets; use mean_length or mean_log_length",
            ))
        }
        (VariableKind::CategoricalMulti, CodingTag::Multi01) => BlockKind::LogisticIndependent,
        (VariableKind::Modal, CodingTag::ModalProbs) => BlockKind::ModalSoftmax,
        (kind, coding) => {
            return Err(Error::encode(
                &spec.name,
                format!("coding {coding:?} does not apply to a {kind} variable"),
            ))
        }
    };
    Ok(OutputBlockSpec::new(spec.name.clone(), columns, kind))
}

/// Output blocks matching an encoded target matrix. Modal blocks are
/// micro-weighted when any row of the table carries a micro-observation count.
pub fn output_blocks(targets: &EncodedMatrix, table: &SymbolicTable) -> Result<Vec<OutputBlockSpec>> {
    targets
        .groups
        .iter()
        .map(|g| {
            let j = table
                .variable_index(&g.source_variable)
                .ok_or_else(|| Error::Schema(format!("unknown target `{}`", g.source_variable)))?;
            let spec = &table.specs()[j];
            let mut block = output_block_for(spec, g.coding, g.columns.clone())?;
            if block.kind == BlockKind::ModalSoftmax {
                block.micro_weighted = table.column(j).any(|v| {
                    matches!(
                        v,
                        SymbolicValue::Distribution {
                            micro_count: Some(_),
                            ..
                        }
                    )
                });
            }
            Ok(block)
        })
        .collect()
}

fn argmax(t: &[f64]) -> usize {
    // Ties go to the lowest index.
    let mut best = 0;
    for (i, &x) in t.iter().enumerate().skip(1) {
        if x > t[best] {
            best = i;
        }
    }
    best
}

/// Translates a block of network outputs back to a symbolic value.
pub fn decode_output_block(block: &OutputBlockSpec, t: &[f64]) -> Result<SymbolicValue> {
    crate::error::check_len(block.len(), t.len(), "output block")?;
    if let Some(w) = block.kind.fixed_width() {
        crate::error::check_len(w, t.len(), "output block width")?;
    }
    if t.is_empty() {
        return Err(Error::encode(&block.source_variable, "empty output block"));
    }
    let check_simplex = || -> Result<()> {
        let sum: f64 = t.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::encode(
                &block.source_variable,
                format!("softmax block sums to {sum}, expected 1"),
            ));
        }
        Ok(())
    };
    Ok(match block.kind {
        BlockKind::LinearQuadratic => SymbolicValue::Number(t[0]),
        BlockKind::IntervalMeanLength => {
            let length = t[1].max(0.0);
            SymbolicValue::interval(t[0] - length / 2.0, t[0] + length / 2.0)
        }
        BlockKind::IntervalMeanLogLength => {
            let length = t[1].exp();
            SymbolicValue::interval(t[0] - length / 2.0, t[0] + length / 2.0)
        }
        BlockKind::SoftmaxCrossEntropy => {
            check_simplex()?;
            SymbolicValue::Category(argmax(t))
        }
        BlockKind::ModalSoftmax => {
            check_simplex()?;
            SymbolicValue::distribution(t.to_vec())
        }
        BlockKind::LogisticIndependent => {
            let members: Vec<usize> = (0..t.len()).filter(|&i| t[i] > 0.5).collect();
            if members.is_empty() {
                let best = argmax(t);
                log::warn!(
                    "`{}`: no output above 0.5, coercing to singleton {{{best}}}",
                    block.source_variable
                );
                SymbolicValue::set([best])
            } else {
                SymbolicValue::set(members)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(kind: BlockKind, len: usize) -> OutputBlockSpec {
        OutputBlockSpec::new("y", 0..len, kind)
    }

    #[test]
    fn softmax_decodes_to_argmax() {
        let v = decode_output_block(&block(BlockKind::SoftmaxCrossEntropy, 3), &[0.2, 0.7, 0.1]).unwrap();
        assert_eq!(v, SymbolicValue::Category(1));
    }

    #[test]
    fn softmax_ties_go_low() {
        let v = decode_output_block(&block(BlockKind::SoftmaxCrossEntropy, 2), &[0.5, 0.5]).unwrap();
        assert_eq!(v, SymbolicValue::Category(0));
    }

    #[test]
    fn softmax_must_be_normalized() {
        assert!(decode_output_block(&block(BlockKind::SoftmaxCrossEntropy, 2), &[0.9, 0.9]).is_err());
    }

    #[test]
    fn logistic_threshold() {
        let v = decode_output_block(&block(BlockKind::LogisticIndependent, 3), &[0.6, 0.4, 0.9]).unwrap();
        assert_eq!(v, SymbolicValue::set([0, 2]));
        let v = decode_output_block(&block(BlockKind::LogisticIndependent, 3), &[0.1, 0.4, 0.3]).unwrap();
        assert_eq!(v, SymbolicValue::set([1]));
    }

    #[test]
    fn interval_decoders() {
        let v = decode_output_block(&block(BlockKind::IntervalMeanLogLength, 2), &[2.0, 0.0]).unwrap();
        assert_eq!(v, SymbolicValue::interval(1.5, 2.5));
        let v = decode_output_block(&block(BlockKind::IntervalMeanLength, 2), &[2.0, -1.0]).unwrap();
        assert_eq!(v, SymbolicValue::interval(2.0, 2.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(decode_output_block(&block(BlockKind::SoftmaxCrossEntropy, 3), &[1.0]).is_err());
    }

    #[test]
    fn bounds_rejected_for_targets() {
        let spec = VariableSpec::interval("y");
        assert!(output_block_for(&spec, CodingTag::Bounds, 0..2).is_err());
        assert_eq!(
            output_block_for(&spec, CodingTag::MeanLength, 0..2).unwrap().kind,
            BlockKind::IntervalMeanLength
        );
    }
}
